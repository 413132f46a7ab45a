//! Squared sample canonical correlations.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::theory::TheoryContext;

/// Relative singular-value floor below which a data matrix counts as rank deficient.
pub const RANK_TOL: f64 = 1e-10;
/// Round-off slack tolerated outside `[0, 1]` before clamping.
pub const CLAMP_SLACK: f64 = 1e-10;
/// Largest dimension accepted by [`naive_scc_spectrum`].
pub const NAIVE_MAX_DIM: usize = 50;

/// Descending squared sample CCCs `λ̃_1 >= … >= λ̃_{min(p,q)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SccSpectrum {
    pub values: Vec<f64>,
    pub p: usize,
    pub q: usize,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpectrumOptions {
    /// Subtract row means before forming the spectrum. Off by default; the
    /// model is mean zero.
    pub center: bool,
}

impl SccSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `λ̃_k`, 1-based.
    pub fn get(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.values.get(i).copied())
    }

    /// Aspect-ratio context matching the spectrum's dimensions.
    pub fn theory(&self) -> Result<TheoryContext> {
        TheoryContext::from_dims(self.p, self.q, self.n)
    }
}

fn check_shapes(x: MatRef<'_, f64>, y: MatRef<'_, f64>) -> Result<(usize, usize, usize)> {
    let (p, q, n) = (x.nrows(), y.nrows(), x.ncols());
    if y.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "X has {n} columns but Y has {}",
            y.ncols()
        )));
    }
    if p == 0 || q == 0 {
        return Err(Error::DimensionMismatch("X and Y need at least one row".into()));
    }
    if !linalg::all_finite(x) || !linalg::all_finite(y) {
        return Err(Error::InvalidArgument("data contain NaN or infinite entries".into()));
    }
    Ok((p, q, n))
}

fn centered(m: MatRef<'_, f64>) -> Mat<f64> {
    let n = m.ncols() as f64;
    let means: Vec<f64> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).sum::<f64>() / n)
        .collect();
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - means[i])
}

fn clamp_unit(v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else if (-CLAMP_SLACK..0.0).contains(&v) {
        Ok(0.0)
    } else if v > 1.0 && v <= 1.0 + CLAMP_SLACK {
        Ok(1.0)
    } else {
        Err(Error::Numerical(format!(
            "squared canonical correlation {v} outside [0, 1]"
        )))
    }
}

/// Orthonormal basis (`n × rows`) of the row space of `m`, with a rank check on `R`.
fn row_space_basis(m: MatRef<'_, f64>, which: &'static str) -> Result<Mat<f64>> {
    let t = m.transpose().to_owned();
    let qr = t.qr();
    let r = qr.thin_R();
    let sv = linalg::singular_values(r.as_ref())?;
    let (smax, smin) = (sv[0], *sv.last().unwrap());
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(ratio >= RANK_TOL) {
        return Err(Error::RankDeficient {
            which,
            ratio,
            tol: RANK_TOL,
        });
    }
    Ok(qr.compute_thin_Q())
}

/// Squared canonical correlations from the canonical angles between row spaces.
///
/// The values are the squared singular values of `Q_xᵀ Q_y`, with `Q_x`, `Q_y`
/// orthonormal bases of the row spaces of `x` and `y`.
pub fn scc_spectrum(x: MatRef<'_, f64>, y: MatRef<'_, f64>) -> Result<SccSpectrum> {
    scc_spectrum_with(x, y, SpectrumOptions::default())
}

pub fn scc_spectrum_with(x: MatRef<'_, f64>, y: MatRef<'_, f64>, opts: SpectrumOptions) -> Result<SccSpectrum> {
    let (p, q, n) = check_shapes(x, y)?;
    if n < p + q {
        return Err(Error::InsufficientSamples { p, q, n });
    }
    let (qx, qy) = if opts.center {
        (
            row_space_basis(centered(x).as_ref(), "X")?,
            row_space_basis(centered(y).as_ref(), "Y")?,
        )
    } else {
        (row_space_basis(x, "X")?, row_space_basis(y, "Y")?)
    };
    let cross = qx.transpose() * &qy;
    let sv = linalg::singular_values(cross.as_ref())?;
    let mut values = sv.iter().map(|s| clamp_unit(s * s)).collect::<Result<Vec<_>>>()?;
    values.sort_by(|a, b| b.total_cmp(a));
    values.truncate(p.min(q));
    Ok(SccSpectrum { values, p, q, n })
}

/// Literal `S_xx^{-1/2} S_xy S_yy^{-1} S_yx S_xx^{-1/2}`; a test oracle for small inputs.
pub fn naive_scc_spectrum(x: MatRef<'_, f64>, y: MatRef<'_, f64>) -> Result<SccSpectrum> {
    let (p, q, n) = check_shapes(x, y)?;
    if p > NAIVE_MAX_DIM || q > NAIVE_MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "naive spectrum limited to p, q <= {NAIVE_MAX_DIM}, got p = {p}, q = {q}"
        )));
    }
    let sxx = x * x.transpose();
    let syy = y * y.transpose();
    let sxy = x * y.transpose();
    let gram_ok = |m: &Mat<f64>| -> Result<bool> {
        let ev = linalg::sym_eigenvalues_desc(m.as_ref())?;
        Ok(ev[ev.len() - 1] > 1e-12 * ev[0].max(f64::MIN_POSITIVE))
    };
    if !gram_ok(&sxx)? {
        return Err(Error::SingularGram("S_xx"));
    }
    if !gram_ok(&syy)? {
        return Err(Error::SingularGram("S_yy"));
    }
    let sxx_is = linalg::sym_apply(sxx.as_ref(), |v| v.powf(-0.5))?;
    let syy_inv = linalg::sym_apply(syy.as_ref(), f64::recip)?;
    let left = &sxx_is * &sxy;
    let mut c = &left * &syy_inv * left.transpose();
    linalg::symmetrize(&mut c);
    let mut values = linalg::sym_eigenvalues_desc(c.as_ref())?;
    values.truncate(p.min(q));
    let values = values.into_iter().map(clamp_unit).collect::<Result<Vec<_>>>()?;
    Ok(SccSpectrum { values, p, q, n })
}

/// Kolmogorov-Smirnov distance between the empirical distribution of the
/// spectrum and the limiting law for `theory`.
pub fn esd_ks_distance(spectrum: &SccSpectrum, theory: &TheoryContext) -> f64 {
    let mut xs = spectrum.values.clone();
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let f = theory.esd_cdf_sorted(&xs);
    let m = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, fi) in f.iter().enumerate() {
        // ties: the empirical CDF jumps only after the last copy of a value
        let hi = xs[i + 1..].iter().take_while(|&&v| v == xs[i]).count() + i + 1;
        d = d.max((hi as f64 / m - fi).abs()).max((fi - i as f64 / m).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;
    use crate::rng::rng_from_seed;

    #[test]
    fn identical_blocks_give_ones() {
        let mut rng = rng_from_seed(1);
        let x = gaussian_matrix(4, 12, &mut rng);
        let s = scc_spectrum(x.as_ref(), x.as_ref()).unwrap();
        assert_eq!(s.values.len(), 4);
        assert!(s.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn disjoint_supports_give_zeros() {
        let x = Mat::from_fn(2, 6, |i, j| if j == i { 1.0 } else { 0.0 });
        let y = Mat::from_fn(3, 6, |i, j| if j == i + 3 { 2.0 } else { 0.0 });
        let s = scc_spectrum(x.as_ref(), y.as_ref()).unwrap();
        assert_eq!(s.values.len(), 2);
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_naive() {
        let mut rng = rng_from_seed(2);
        let x = gaussian_matrix(5, 20, &mut rng);
        let y = gaussian_matrix(5, 20, &mut rng);
        let a = scc_spectrum(x.as_ref(), y.as_ref()).unwrap();
        let b = naive_scc_spectrum(x.as_ref(), y.as_ref()).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn scalar_case_is_squared_cosine() {
        let x = Mat::from_fn(1, 4, |_, j| [1.0, 2.0, -1.0, 0.5][j]);
        let y = Mat::from_fn(1, 4, |_, j| [0.3, 1.0, 2.0, -1.0][j]);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for j in 0..4 {
            sxy += x[(0, j)] * y[(0, j)];
            sxx += x[(0, j)] * x[(0, j)];
            syy += y[(0, j)] * y[(0, j)];
        }
        let want = sxy * sxy / (sxx * syy);
        let s = naive_scc_spectrum(x.as_ref(), y.as_ref()).unwrap();
        assert!((s.values[0] - want).abs() < 1e-14);
        let s = scc_spectrum(x.as_ref(), y.as_ref());
        assert!(s.is_ok());
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = rng_from_seed(3);
        let x = gaussian_matrix(4, 6, &mut rng);
        let y = gaussian_matrix(3, 6, &mut rng);
        assert!(matches!(
            scc_spectrum(x.as_ref(), y.as_ref()),
            Err(Error::InsufficientSamples { .. })
        ));
        let y = gaussian_matrix(3, 7, &mut rng);
        assert!(matches!(
            scc_spectrum(x.as_ref(), y.as_ref()),
            Err(Error::DimensionMismatch(_))
        ));
        let mut x = gaussian_matrix(3, 10, &mut rng);
        for j in 0..10 {
            x[(2, j)] = x[(0, j)] - 2.0 * x[(1, j)];
        }
        let y = gaussian_matrix(3, 10, &mut rng);
        assert!(matches!(
            scc_spectrum(x.as_ref(), y.as_ref()),
            Err(Error::RankDeficient { which: "X", .. })
        ));
        assert!(matches!(
            naive_scc_spectrum(x.as_ref(), y.as_ref()),
            Err(Error::SingularGram("S_xx"))
        ));
        let big = gaussian_matrix(51, 120, &mut rng);
        assert!(naive_scc_spectrum(big.as_ref(), y.as_ref()).is_err());
    }

    #[test]
    fn centering_removes_row_means() {
        let mut rng = rng_from_seed(4);
        let x = gaussian_matrix(3, 30, &mut rng);
        let y = gaussian_matrix(2, 30, &mut rng);
        let shifted = Mat::from_fn(3, 30, |i, j| x[(i, j)] + 5.0 * (i as f64 + 1.0));
        let opts = SpectrumOptions { center: true };
        let a = scc_spectrum_with(x.as_ref(), y.as_ref(), opts).unwrap();
        let b = scc_spectrum_with(shifted.as_ref(), y.as_ref(), opts).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn ks_extremes() {
        let ctx = TheoryContext::new(0.2, 0.2).unwrap();
        let zeros = SccSpectrum {
            values: vec![0.0; 50],
            p: 50,
            q: 50,
            n: 250,
        };
        assert!((esd_ks_distance(&zeros, &ctx) - 1.0).abs() < 1e-12);
        let q = 80;
        let values = (1..=q).map(|j| ctx.classical_location(j, q).unwrap()).collect();
        let s = SccSpectrum {
            values,
            p: q,
            q,
            n: 5 * q,
        };
        assert!(esd_ks_distance(&s, &ctx) <= 1.0 / q as f64 + 1e-8);
    }
}
