//! Small goodness-of-fit helpers for the harness.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        // the alternating series converges slowly here; the value is 1 to double precision
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test of `samples` against `N(mean, variance)`, with
/// Stephens' small-sample correction of the asymptotic p-value.
pub fn ks_test_normal(samples: &[f64], mean: f64, variance: f64) -> Result<KsTest> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("KS test needs at least one sample".into()));
    }
    let law = Normal::new(mean, variance.sqrt())
        .map_err(|e| Error::InvalidArgument(format!("invalid reference normal: {e}")))?;
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = law.cdf(x);
            (f - i as f64 / m).max((i as f64 + 1.0) / m - f)
        })
        .fold(0.0, f64::max);
    let root = m.sqrt();
    Ok(KsTest {
        statistic: d,
        p_value: kolmogorov_sf((root + 0.12 + 0.11 / root) * d),
    })
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_values() {
        // classical critical values: P(K > 1.36) ≈ 0.05, P(K > 1.63) ≈ 0.01
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-3);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn normal_quantiles_pass() {
        let law = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (1..=200).map(|i| law.inverse_cdf((i as f64 - 0.5) / 200.0)).collect();
        let t = ks_test_normal(&xs, 0.0, 1.0).unwrap();
        assert!(t.statistic <= 0.0025 + 1e-6, "{}", t.statistic);
        assert!(t.p_value > 0.99);
        let shifted = ks_test_normal(&xs, 1.0, 1.0).unwrap();
        assert!(shifted.p_value < 1e-6);
    }
}
