//! Small dense helpers on top of `faer`.

use faer::{Mat, MatRef, Side};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
pub fn sym_eigen_desc(m: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigendecomposition failed: {e:?}")))?;
    let k = m.nrows();
    let s = evd.S().column_vector();
    let u = evd.U();
    let values: Vec<f64> = (0..k).rev().map(|i| s[i]).collect();
    let vectors = Mat::from_fn(k, k, |i, j| u[(i, k - 1 - j)]);
    Ok((values, vectors))
}

pub fn sym_eigenvalues_desc(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let mut v = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigenvalues failed: {e:?}")))?;
    v.reverse();
    Ok(v)
}

pub fn singular_values(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    m.singular_values()
        .map_err(|e| Error::Numerical(format!("singular value decomposition failed: {e:?}")))
}

/// `V f(D) Vᵀ` for a symmetric `m = V D Vᵀ`.
pub fn sym_apply(m: MatRef<'_, f64>, f: impl Fn(f64) -> f64) -> Result<Mat<f64>> {
    let (vals, vecs) = sym_eigen_desc(m)?;
    let k = m.nrows();
    let scaled = Mat::from_fn(k, k, |i, j| vecs[(i, j)] * f(vals[j]));
    Ok(&scaled * vecs.transpose())
}

pub fn symmetrize(m: &mut Mat<f64>) {
    let k = m.nrows();
    for i in 0..k {
        for j in 0..i {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Haar-distributed `rows × cols` matrix with orthonormal columns:
/// QR of a Gaussian matrix with the signs of `diag(R)` folded into `Q`.
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat<f64> {
    assert!(cols <= rows, "need cols <= rows for orthonormal columns");
    if cols == 0 {
        return Mat::zeros(rows, 0);
    }
    let g = gaussian_matrix(rows, cols, rng);
    let qr = g.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    Mat::from_fn(rows, cols, |i, j| {
        let s = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        q[(i, j)] * s
    })
}

pub fn max_abs_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

pub fn all_finite(m: MatRef<'_, f64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].is_finite()))
}

/// Number of eigenvalues of the symmetric tridiagonal matrix
/// `(diag, off)` strictly below `x` (Sturm count via the LDLᵀ pivots).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0f64;
    for i in 0..diag.len() {
        let e2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        d = diag[i] - x - if i == 0 { 0.0 } else { e2 / d };
        if d == 0.0 {
            d = -f64::EPSILON * (diag[i].abs() + x.abs() + 1.0);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest `k` eigenvalues (descending) of a symmetric tridiagonal matrix,
/// by bisection on the Sturm count.
pub fn tridiagonal_top_eigenvalues(diag: &[f64], off: &[f64], k: usize) -> Vec<f64> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n.max(1));
    let k = k.min(n);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(1e-300);
    let tol = 4.0 * f64::EPSILON * scale;
    (0..k)
        .map(|m| {
            // m-th largest = eigenvalue with exactly n - 1 - m values below it
            let target = n - m;
            let (mut a, mut b) = (lo, hi);
            while b - a > tol {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if sturm_count(diag, off, mid) >= target {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn orthonormal_columns() {
        let mut rng = rng_from_seed(3);
        let q = random_orthonormal(30, 5, &mut rng);
        let g = q.transpose() * &q;
        let eye = Mat::<f64>::identity(5, 5);
        assert!(max_abs_diff(g.as_ref(), eye.as_ref()) < 1e-12);
    }

    #[test]
    fn sturm_bisection_matches_dense() {
        let mut rng = rng_from_seed(11);
        let n = 40;
        let d: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let e: Vec<f64> = (0..n - 1).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let dense = Mat::from_fn(n, n, |i, j| {
            if i == j {
                d[i]
            } else if i == j + 1 {
                e[j]
            } else if j == i + 1 {
                e[i]
            } else {
                0.0
            }
        });
        let full = sym_eigenvalues_desc(dense.as_ref()).unwrap();
        let top = tridiagonal_top_eigenvalues(&d, &e, 6);
        for (a, b) in top.iter().zip(&full) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn sym_apply_inverse_sqrt() {
        let m = Mat::from_fn(3, 3, |i, j| if i == j { 4.0 } else { 1.0 });
        let r = sym_apply(m.as_ref(), |x| x.powf(-0.5)).unwrap();
        let back = &r * &m * &r;
        assert!(max_abs_diff(back.as_ref(), Mat::<f64>::identity(3, 3).as_ref()) < 1e-12);
    }
}
