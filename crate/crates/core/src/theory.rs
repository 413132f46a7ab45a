//! Deterministic large-`n` limits for the null SCC spectrum and its outliers.
//!
//! All quantities depend only on the aspect ratios `c1 = p/n`, `c2 = q/n`.
//! [`TheoryContext`] normalizes them so that `c2 <= c1`; every formula here is
//! either symmetric in the two ratios or written for that ordering.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Absolute tolerance for integrals of the limiting density.
const DENSITY_QUAD_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryContext {
    c1: f64,
    c2: f64,
    /// True when the ratios were supplied with `c2 > c1` and got swapped.
    swapped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeData {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub t_c: f64,
}

/// Limits of the averaged resolvent blocks at a spectral parameter `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StieltjesLimits {
    pub m1c: Complex64,
    pub m2c: Complex64,
    pub m3c: Complex64,
    pub m4c: Complex64,
    pub h: Complex64,
}

/// Outcome of inverting the outlier map at an observed eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CccEstimate {
    pub t_hat: f64,
    /// Set when the eigenvalue sat inside the bulk and `t_c` was returned.
    pub clamped: bool,
}

impl TheoryContext {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        let ok = |c: f64| c.is_finite() && c > 0.0 && c < 1.0;
        if !ok(c1) || !ok(c2) {
            return Err(Error::InvalidArgument(format!(
                "aspect ratios must lie in (0, 1), got c1 = {c1}, c2 = {c2}"
            )));
        }
        if c1 + c2 >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "need c1 + c2 < 1, got {c1} + {c2} = {}",
                c1 + c2
            )));
        }
        Ok(if c2 > c1 {
            Self {
                c1: c2,
                c2: c1,
                swapped: true,
            }
        } else {
            Self { c1, c2, swapped: false }
        })
    }

    pub fn from_dims(p: usize, q: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        Self::new(p as f64 / n as f64, q as f64 / n as f64)
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn swapped(&self) -> bool {
        self.swapped
    }

    /// BBP threshold `t_c = sqrt(c1 c2 / ((1-c1)(1-c2)))`.
    pub fn threshold_tc(&self) -> f64 {
        let (c1, c2) = (self.c1, self.c2);
        (c1 * c2 / ((1.0 - c1) * (1.0 - c2))).sqrt()
    }

    /// `(lambda_minus, lambda_plus)`, the support of the limiting density.
    pub fn bulk_edges(&self) -> (f64, f64) {
        let (c1, c2) = (self.c1, self.c2);
        let a = (c1 * (1.0 - c2)).sqrt();
        let b = (c2 * (1.0 - c1)).sqrt();
        ((a - b).powi(2), (a + b).powi(2))
    }

    pub fn edge_data(&self) -> EdgeData {
        let (lambda_minus, lambda_plus) = self.bulk_edges();
        EdgeData {
            lambda_minus,
            lambda_plus,
            t_c: self.threshold_tc(),
        }
    }

    /// Tracy–Widom scale at the right edge.
    pub fn c_tw(&self) -> f64 {
        let (c1, c2) = (self.c1, self.c2);
        let (_, lp) = self.bulk_edges();
        let num = lp * lp * (1.0 - lp).powi(2);
        let den = (c1 * c2 * (1.0 - c1) * (1.0 - c2)).sqrt();
        (num / den).cbrt()
    }

    /// `a(t) = (1-c1)(1-c2)(t^2 - t_c^2)/t^2`, which equals `g_c'(t)`.
    pub fn a_of_t(&self, t: f64) -> f64 {
        let tc = self.threshold_tc();
        (1.0 - self.c1) * (1.0 - self.c2) * (t * t - tc * tc) / (t * t)
    }

    /// Variance scale of a supercritical outlier with Gaussian entries.
    pub fn c_g(&self, t: f64) -> f64 {
        let (c1, c2) = (self.c1, self.c2);
        let tc = self.threshold_tc();
        (1.0 - c1).powi(2) * (1.0 - c2).powi(2) * (1.0 - t).powi(2) * (t * t - tc * tc) / (t * t)
            * (2.0 * t + c1 / (1.0 - c1) + c2 / (1.0 - c2))
    }

    /// Limiting density of the null SCC eigenvalues.
    pub fn esd_density(&self, x: f64) -> f64 {
        let (lm, lp) = self.bulk_edges();
        if !(x > lm && x < lp) {
            return 0.0;
        }
        ((lp - x) * (x - lm)).sqrt() / (2.0 * PI * self.c2 * x * (1.0 - x))
    }

    /// Density after `x = lm + (lp - lm) sin^2(u)`, `u ∈ [0, π/2]`; smooth at both ends.
    fn density_in_angle(&self, u: f64) -> f64 {
        let (lm, lp) = self.bulk_edges();
        let w = lp - lm;
        let (s, c) = u.sin_cos();
        let s2 = s * s;
        let x = lm + w * s2;
        let ratio = if lm == 0.0 { 1.0 / w } else { s2 / x };
        w * w * ratio * c * c / (PI * self.c2 * (1.0 - x))
    }

    fn angle_of(&self, x: f64) -> f64 {
        let (lm, lp) = self.bulk_edges();
        ((x - lm) / (lp - lm)).clamp(0.0, 1.0).sqrt().asin()
    }

    /// Limiting distribution function `F(x)`.
    pub fn esd_cdf(&self, x: f64) -> f64 {
        let (lm, lp) = self.bulk_edges();
        if x <= lm {
            return 0.0;
        }
        if x >= lp {
            return 1.0;
        }
        let u = self.angle_of(x);
        quad::integrate(|v| self.density_in_angle(v), 0.0, u, DENSITY_QUAD_TOL)
    }

    /// `F` at each point of an ascending slice, integrating only between
    /// neighbours so the cost stays linear in the number of points.
    pub fn esd_cdf_sorted(&self, xs: &[f64]) -> Vec<f64> {
        let (lm, lp) = self.bulk_edges();
        let mut out = Vec::with_capacity(xs.len());
        let (mut u_prev, mut acc) = (0.0, 0.0);
        for &x in xs {
            if x <= lm {
                out.push(0.0);
                continue;
            }
            if x >= lp {
                out.push(1.0);
                continue;
            }
            let u = self.angle_of(x);
            if u > u_prev {
                acc += quad::integrate(|v| self.density_in_angle(v), u_prev, u, DENSITY_QUAD_TOL);
                u_prev = u;
            }
            out.push(acc.min(1.0));
        }
        out
    }

    /// `∫ f` over the whole support; 1 up to quadrature error.
    pub fn density_mass(&self) -> f64 {
        quad::integrate(|v| self.density_in_angle(v), 0.0, PI / 2.0, DENSITY_QUAD_TOL)
    }

    /// Classical location `γ_j`: the point with mass `(j-1)/q` above it.
    pub fn classical_location(&self, j: usize, q: usize) -> Result<f64> {
        if j == 0 || j > q {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= j <= q, got j = {j}, q = {q}"
            )));
        }
        let (lm, lp) = self.bulk_edges();
        if j == 1 {
            return Ok(lp);
        }
        let target = 1.0 - (j - 1) as f64 / q as f64;
        let (mut a, mut b) = (lm, lp);
        while b - a > 1e-13 {
            let mid = 0.5 * (a + b);
            if self.esd_cdf(mid) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }

    fn sqrt_disc_real(&self, z: f64) -> f64 {
        let (lm, lp) = self.bulk_edges();
        ((z - lm) * (z - lp)).max(0.0).sqrt()
    }

    /// `f_c(z)` for real `z >= lambda_plus`; `f_c(lambda_plus) = t_c`.
    pub fn f_c(&self, z: f64) -> Result<f64> {
        let (_, lp) = self.bulk_edges();
        if !(z >= lp) || !z.is_finite() {
            return Err(Error::domain("f_c", z, format!("z >= lambda_plus = {lp}")));
        }
        let (c1, c2) = (self.c1, self.c2);
        Ok((z - (c1 + c2 - 2.0 * c1 * c2) + self.sqrt_disc_real(z)) / (2.0 * (1.0 - c1) * (1.0 - c2)))
    }

    /// Inverse of `f_c`: `g_c(t) = t (1 - c1 + c1/t)(1 - c2 + c2/t)` for `t >= t_c`.
    pub fn g_c(&self, t: f64) -> Result<f64> {
        let tc = self.threshold_tc();
        if !(t >= tc) || !t.is_finite() {
            return Err(Error::domain("g_c", t, format!("t >= t_c = {tc}")));
        }
        let (c1, c2) = (self.c1, self.c2);
        Ok(t * (1.0 - c1 + c1 / t) * (1.0 - c2 + c2 / t))
    }

    /// Almost-sure limit `θ = g_c(t)` of the outlier produced by a supercritical `t`.
    pub fn outlier_location(&self, t: f64) -> Result<f64> {
        let tc = self.threshold_tc();
        if !(t > tc && t <= 1.0) {
            return Err(Error::domain("outlier_location", t, format!("t_c = {tc} < t <= 1")));
        }
        self.g_c(t)
    }

    /// Invert the outlier map at an observed eigenvalue `lam`.
    ///
    /// Eigenvalues inside `[lambda_minus, lambda_plus]` carry no outlier
    /// information; they map to `t_c` with `clamped = true`.
    pub fn estimate_t_from_lambda(&self, lam: f64) -> Result<CccEstimate> {
        let (lm, lp) = self.bulk_edges();
        if !(lam >= lm && lam <= 1.0) {
            return Err(Error::domain(
                "estimate_t_from_lambda",
                lam,
                format!("lambda_minus = {lm} <= lambda <= 1"),
            ));
        }
        if lam <= lp {
            return Ok(CccEstimate {
                t_hat: self.threshold_tc(),
                clamped: true,
            });
        }
        Ok(CccEstimate {
            t_hat: self.f_c(lam)?,
            clamped: false,
        })
    }

    /// Closed forms of `m_{1c..4c}(z)` and `h(z)`.
    ///
    /// `sqrt((z - λ₋)(z - λ₊))` is taken as `sqrt(z - λ₋)·sqrt(z - λ₊)` with
    /// principal roots: positive on `z > λ₊`, positive imaginary part on the
    /// upper half-plane, analytic off the bulk.
    pub fn stieltjes_limits(&self, z: Complex64) -> Result<StieltjesLimits> {
        let (lm, lp) = self.bulk_edges();
        if z.im == 0.0 && z.re > lm && z.re < lp {
            return Err(Error::domain(
                "stieltjes_limits",
                z.re,
                format!("real z outside ({lm}, {lp})"),
            ));
        }
        let (c1, c2) = (self.c1, self.c2);
        let one = Complex64::new(1.0, 0.0);
        let root = (z - lm).sqrt() * (z - lp).sqrt();
        let m1c = (-z + c1 + c2 + root) / (2.0 * (1.0 - c1) * z * (one - z)) - c1 / ((1.0 - c1) * z);
        let m2c = (-z + c1 + c2 + root) / (2.0 * (1.0 - c2) * z * (one - z)) - c2 / ((1.0 - c2) * z);
        let m3c = 0.5 * ((1.0 - 2.0 * c1) * z + (c1 - c2) + root);
        let m4c = 0.5 * ((1.0 - 2.0 * c2) * z + (c2 - c1) + root);
        let h = 0.5 * z.sqrt() * (-z + (2.0 - c1 - c2) + root);
        Ok(StieltjesLimits { m1c, m2c, m3c, m4c, h })
    }
}
