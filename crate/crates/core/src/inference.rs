//! Independence tests and estimators of the number and size of the signals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{onatski_critical, tw1_quantile, OnatskiRequest};
use crate::spectrum::SccSpectrum;
use crate::theory::{CccEstimate, TheoryContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Tw,
    Onatski,
}

/// Where the critical value of the gap-ratio test comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnatskiCritical {
    Fixed(f64),
    Simulated(OnatskiRequest),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestMethod {
    Tw,
    Onatski { r_star: usize, critical: OnatskiCritical },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub method: MethodKind,
    pub r0: usize,
    /// Zero for the Tracy-Widom test.
    pub r_star: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankMethod {
    Threshold,
    Ratio,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEstimate {
    pub r_hat: usize,
    pub method: RankMethod,
    pub threshold_used: f64,
}

fn need(spectrum: &SccSpectrum, k: usize, what: &str) -> Result<()> {
    if spectrum.len() < k {
        return Err(Error::DimensionMismatch(format!(
            "{what} needs {k} eigenvalues but min(p, q) = {}",
            spectrum.len()
        )));
    }
    Ok(())
}

/// `n^{2/3}(λ̃_{r0+1} - λ_+)/c_TW`.
pub fn stat_tw(spectrum: &SccSpectrum, ctx: &TheoryContext, n: usize, r0: usize) -> Result<f64> {
    need(spectrum, r0 + 1, "the Tracy-Widom statistic")?;
    let (_, lp) = ctx.bulk_edges();
    Ok((n as f64).powf(2.0 / 3.0) * (spectrum.values[r0] - lp) / ctx.c_tw())
}

/// `(λ̃_{r0+1} - λ̃_{r0+2})/(λ̃_{r*+1} - λ̃_{r*+2})`.
pub fn stat_onatski(spectrum: &SccSpectrum, r0: usize, r_star: usize) -> Result<f64> {
    if r_star <= r0 {
        return Err(Error::InvalidArgument(format!(
            "need r_star > r0, got {r_star} <= {r0}"
        )));
    }
    need(spectrum, r_star + 2, "the gap-ratio statistic")?;
    let v = &spectrum.values;
    let den = v[r_star] - v[r_star + 1];
    if !(den > 0.0) {
        return Err(Error::Numerical(format!(
            "zero gap between eigenvalues {} and {}",
            r_star + 1,
            r_star + 2
        )));
    }
    Ok((v[r0] - v[r0 + 1]) / den)
}

/// Test `H0: at most r0 signals` at level `alpha`.
pub fn test_independence(
    spectrum: &SccSpectrum,
    ctx: &TheoryContext,
    n: usize,
    alpha: f64,
    method: TestMethod,
    r0: usize,
) -> Result<TestOutcome> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (statistic, critical_value, kind, r_star) = match method {
        TestMethod::Tw => (
            stat_tw(spectrum, ctx, n, r0)?,
            tw1_quantile(1.0 - alpha)?,
            MethodKind::Tw,
            0,
        ),
        TestMethod::Onatski { r_star, critical } => {
            let stat = stat_onatski(spectrum, r0, r_star)?;
            let crit = match critical {
                OnatskiCritical::Fixed(c) => c,
                OnatskiCritical::Simulated(req) => {
                    if (req.r_star, req.r0) != (r_star, r0) {
                        return Err(Error::InvalidArgument(
                            "simulated critical value was requested for a different (r_star, r0)".into(),
                        ));
                    }
                    onatski_critical(&req, alpha)?
                }
            };
            (stat, crit, MethodKind::Onatski, r_star)
        }
    };
    Ok(TestOutcome {
        statistic,
        critical_value,
        alpha,
        reject: statistic >= critical_value,
        method: kind,
        r0,
        r_star,
    })
}

/// Default `ω₁ = n^{-1/2}`.
pub fn default_omega1(n: usize) -> f64 {
    (n as f64).sqrt().recip()
}

/// Default `ω_o = q^{1/2}` with `q = min(p, q)`.
pub fn default_omega_o(q: usize) -> f64 {
    (q as f64).sqrt()
}

/// Number of eigenvalues at least `ω₁` above the bulk edge.
pub fn estimate_rank_threshold(spectrum: &SccSpectrum, ctx: &TheoryContext, omega1: f64) -> Result<RankEstimate> {
    if !(omega1 > 0.0) {
        return Err(Error::InvalidArgument(format!("omega1 must be positive, got {omega1}")));
    }
    let (_, lp) = ctx.bulk_edges();
    Ok(RankEstimate {
        r_hat: spectrum.values.iter().filter(|&&v| v - lp >= omega1).count(),
        method: RankMethod::Threshold,
        threshold_used: omega1,
    })
}

/// Largest `i <= r*` whose gap ratio `(λ̃_i - λ̃_{i+1})/(λ̃_{i+1} - λ̃_{i+2})` reaches `ω_o`.
pub fn estimate_rank_ratio(spectrum: &SccSpectrum, omega_o: f64, r_star: usize) -> Result<RankEstimate> {
    if !(omega_o > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "omega_o must be positive, got {omega_o}"
        )));
    }
    need(spectrum, r_star + 2, "the gap-ratio rank estimator")?;
    let v = &spectrum.values;
    let mut r_hat = 0;
    for i in 1..=r_star {
        let den = v[i] - v[i + 1];
        if !(den > 0.0) {
            return Err(Error::Numerical(format!(
                "zero gap between eigenvalues {} and {}",
                i + 1,
                i + 2
            )));
        }
        if (v[i - 1] - v[i]) / den >= omega_o {
            r_hat = i;
        }
    }
    Ok(RankEstimate {
        r_hat,
        method: RankMethod::Ratio,
        threshold_used: omega_o,
    })
}

/// Invert the outlier map at the top `k` eigenvalues.
pub fn estimate_ccc(spectrum: &SccSpectrum, ctx: &TheoryContext, k: usize) -> Result<Vec<CccEstimate>> {
    need(spectrum, k, "CCC estimation")?;
    spectrum.values[..k]
        .iter()
        .map(|&l| ctx.estimate_t_from_lambda(l))
        .collect()
}
