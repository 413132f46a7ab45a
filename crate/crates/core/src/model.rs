//! The spiked-CCA generative model `𝒳 = X + AZ`, `𝒴 = Y + BZ`.

use faer::{Mat, MatRef};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{rng_from_seed, SimRng};

/// Factor loadings `A` (`p × r`) and `B` (`q × r`).
///
/// Serialized as `{"a": [[..], ..], "b": [[..], ..]}`, each matrix an
/// array of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LoadingsRepr", into = "LoadingsRepr")]
pub struct FactorLoadings {
    a: Mat<f64>,
    b: Mat<f64>,
}

#[derive(Serialize, Deserialize)]
struct LoadingsRepr {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

fn rows_of(m: MatRef<'_, f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn from_rows(rows: &[Vec<f64>], name: &str) -> Result<Mat<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidSpec(format!("loading matrix {name} is ragged")));
    }
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl From<FactorLoadings> for LoadingsRepr {
    fn from(l: FactorLoadings) -> Self {
        LoadingsRepr {
            a: rows_of(l.a.as_ref()),
            b: rows_of(l.b.as_ref()),
        }
    }
}

impl TryFrom<LoadingsRepr> for FactorLoadings {
    type Error = Error;
    fn try_from(r: LoadingsRepr) -> Result<Self> {
        let a = from_rows(&r.a, "a")?;
        let mut b = from_rows(&r.b, "b")?;
        // an all-empty-rows matrix reads back with zero columns either way
        if b.ncols() == 0 && a.ncols() == 0 {
            b = Mat::zeros(r.b.len(), 0);
        }
        FactorLoadings::new(a, b)
    }
}

impl FactorLoadings {
    pub fn new(a: Mat<f64>, b: Mat<f64>) -> Result<Self> {
        if a.ncols() != b.ncols() {
            return Err(Error::InvalidSpec(format!(
                "A has {} columns but B has {}",
                a.ncols(),
                b.ncols()
            )));
        }
        if !linalg::all_finite(a.as_ref()) || !linalg::all_finite(b.as_ref()) {
            return Err(Error::InvalidSpec("loadings contain NaN or infinite entries".into()));
        }
        Ok(Self { a, b })
    }

    pub fn zeros(p: usize, q: usize, r: usize) -> Self {
        Self {
            a: Mat::zeros(p, r),
            b: Mat::zeros(q, r),
        }
    }

    pub fn a(&self) -> MatRef<'_, f64> {
        self.a.as_ref()
    }

    pub fn b(&self) -> MatRef<'_, f64> {
        self.b.as_ref()
    }

    pub fn p(&self) -> usize {
        self.a.nrows()
    }

    pub fn q(&self) -> usize {
        self.b.nrows()
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    /// `A = Σ a_i e_i e_iᵀ`, `B = Σ b_i e_i e_iᵀ` with coordinate directions.
    pub fn standard_basis(p: usize, q: usize, a_scales: &[f64], b_scales: &[f64]) -> Result<Self> {
        let r = a_scales.len();
        if b_scales.len() != r {
            return Err(Error::InvalidArgument("a_scales and b_scales differ in length".into()));
        }
        if r > p.min(q) {
            return Err(Error::InvalidArgument(format!(
                "rank {r} exceeds min(p, q) = {}",
                p.min(q)
            )));
        }
        let a = Mat::from_fn(p, r, |i, j| if i == j { a_scales[j] } else { 0.0 });
        let b = Mat::from_fn(q, r, |i, j| if i == j { b_scales[j] } else { 0.0 });
        Self::new(a, b)
    }

    /// Scale all entries of `A` (used for sweeps over the signal strength).
    pub fn with_a_scaled(&self, s: f64) -> Self {
        Self {
            a: Mat::from_fn(self.a.nrows(), self.a.ncols(), |i, j| s * self.a[(i, j)]),
            b: self.b.clone(),
        }
    }
}

/// `A = Σ a_i u_i^a v_iᵀ`, `B = Σ b_i u_i^b v_i'ᵀ` with Haar-random orthonormal
/// directions; `shared_right` forces `v_i = v_i'`.
pub fn random_unit_loadings(
    p: usize,
    q: usize,
    r: usize,
    a_scales: &[f64],
    b_scales: &[f64],
    shared_right: bool,
    seed: u64,
) -> Result<FactorLoadings> {
    if a_scales.len() != r || b_scales.len() != r {
        return Err(Error::InvalidArgument(format!(
            "scale lists must have length r = {r} (got {} and {})",
            a_scales.len(),
            b_scales.len()
        )));
    }
    if r > p.min(q) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} exceeds min(p, q) = {}",
            p.min(q)
        )));
    }
    let mut rng = rng_from_seed(seed);
    let ua = linalg::random_orthonormal(p, r, &mut rng);
    let ub = linalg::random_orthonormal(q, r, &mut rng);
    let va = linalg::random_orthonormal(r, r, &mut rng);
    let vb = if shared_right {
        va.clone()
    } else {
        linalg::random_orthonormal(r, r, &mut rng)
    };
    let scale_cols = |u: &Mat<f64>, s: &[f64]| Mat::from_fn(u.nrows(), r, |i, j| u[(i, j)] * s[j]);
    let a = scale_cols(&ua, a_scales) * va.transpose();
    let b = scale_cols(&ub, b_scales) * vb.transpose();
    FactorLoadings::new(a, b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    Gaussian,
    Rademacher,
    /// Symmetric three-point law `{-s, 0, s}` matched to the requested
    /// fourth moment (any excess `>= -2`).
    CustomIid,
}

/// Law of the standardized noise entries, with the fourth-cumulant excess
/// `μ⁽⁴⁾ - 3` of each source.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryLaw {
    pub kind: EntryKind,
    pub excess_x: f64,
    pub excess_y: f64,
    pub excess_z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    X,
    Y,
    Z,
}

impl EntryLaw {
    pub fn gaussian() -> Self {
        Self {
            kind: EntryKind::Gaussian,
            excess_x: 0.0,
            excess_y: 0.0,
            excess_z: 0.0,
        }
    }

    pub fn rademacher() -> Self {
        Self {
            kind: EntryKind::Rademacher,
            excess_x: -2.0,
            excess_y: -2.0,
            excess_z: -2.0,
        }
    }

    pub fn custom(excess_x: f64, excess_y: f64, excess_z: f64) -> Result<Self> {
        let law = Self {
            kind: EntryKind::CustomIid,
            excess_x,
            excess_y,
            excess_z,
        };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        let ex = [self.excess_x, self.excess_y, self.excess_z];
        match self.kind {
            EntryKind::Gaussian if ex.iter().any(|&e| e != 0.0) => Err(Error::InvalidSpec(
                "gaussian entries have zero fourth-cumulant excess".into(),
            )),
            EntryKind::Rademacher if ex.iter().any(|&e| e != -2.0) => Err(Error::InvalidSpec(
                "rademacher entries have fourth-cumulant excess -2".into(),
            )),
            EntryKind::CustomIid if ex.iter().any(|&e| !(e >= -2.0) || !e.is_finite()) => Err(Error::InvalidSpec(
                "a fourth moment below the squared variance (excess < -2) is impossible".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn excess(&self, source: Source) -> f64 {
        match source {
            Source::X => self.excess_x,
            Source::Y => self.excess_y,
            Source::Z => self.excess_z,
        }
    }

    /// One standardized (mean 0, variance 1) draw for `source`.
    #[inline]
    fn draw<R: Rng + ?Sized>(&self, source: Source, rng: &mut R) -> f64 {
        match self.kind {
            EntryKind::Gaussian => rng.sample(StandardNormal),
            EntryKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryKind::CustomIid => {
                // P(±s) = w/2, P(0) = 1 - w with w s² = 1 and μ⁽⁴⁾ = 1/w
                let w = 1.0 / (3.0 + self.excess(source));
                let u: f64 = rng.random();
                if u >= w {
                    0.0
                } else if u < 0.5 * w {
                    w.recip().sqrt()
                } else {
                    -w.recip().sqrt()
                }
            }
        }
    }

    /// `rows × cols` matrix of i.i.d. entries with variance `1/n`.
    pub fn sample_matrix<R: Rng + ?Sized>(
        &self,
        source: Source,
        rows: usize,
        cols: usize,
        n: usize,
        rng: &mut R,
    ) -> Mat<f64> {
        let scale = (n as f64).sqrt().recip();
        let mut m = Mat::<f64>::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = scale * self.draw(source, rng);
            }
        }
        m
    }
}

/// Full description of a spiked-CCA experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub r: usize,
    pub loadings: FactorLoadings,
    pub entry_law: EntryLaw,
    /// Diagonal of `Σ^{1/2}` applied on the right of both data matrices.
    pub heterogeneity: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(n: usize, loadings: FactorLoadings, entry_law: EntryLaw) -> Result<Self> {
        let spec = Self {
            p: loadings.p(),
            q: loadings.q(),
            n,
            r: loadings.rank(),
            loadings,
            entry_law,
            heterogeneity: None,
            seed: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_heterogeneity(mut self, h: Option<Vec<f64>>) -> Result<Self> {
        self.heterogeneity = h;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (p, q, n, r) = (self.p, self.q, self.n, self.r);
        if p == 0 || q == 0 || n == 0 {
            return Err(Error::InvalidSpec("p, q and n must be positive".into()));
        }
        if p + q >= n {
            return Err(Error::InvalidSpec(format!("need p + q < n, got {p} + {q} >= {n}")));
        }
        if r > p.min(q) {
            return Err(Error::InvalidSpec(format!("rank {r} exceeds min(p, q)")));
        }
        let (a, b) = (self.loadings.a(), self.loadings.b());
        if (a.nrows(), a.ncols()) != (p, r) || (b.nrows(), b.ncols()) != (q, r) {
            return Err(Error::InvalidSpec(format!(
                "loadings are {}x{} and {}x{}, expected {p}x{r} and {q}x{r}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if let Some(h) = &self.heterogeneity {
            if h.len() != n {
                return Err(Error::InvalidSpec(format!(
                    "heterogeneity has {} entries, expected n = {n}",
                    h.len()
                )));
            }
            if h.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
                return Err(Error::InvalidSpec(
                    "heterogeneity entries must be positive and finite".into(),
                ));
            }
        }
        self.entry_law.validate()
    }
}

/// One synthesized sample `(𝒳, 𝒴)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSet {
    pub x_tilde: Mat<f64>,
    pub y_tilde: Mat<f64>,
    pub seed: u64,
    pub spec_echo: ModelSpec,
}

fn sample_with(spec: &ModelSpec, rng: &mut SimRng) -> (Mat<f64>, Mat<f64>) {
    let law = &spec.entry_law;
    let (p, q, n, r) = (spec.p, spec.q, spec.n, spec.r);
    let mut x = law.sample_matrix(Source::X, p, n, n, rng);
    let mut y = law.sample_matrix(Source::Y, q, n, n, rng);
    if r > 0 {
        let z = law.sample_matrix(Source::Z, r, n, n, rng);
        x += spec.loadings.a() * &z;
        y += spec.loadings.b() * &z;
    }
    if let Some(h) = &spec.heterogeneity {
        for (j, &s) in h.iter().enumerate() {
            for i in 0..p {
                x[(i, j)] *= s;
            }
            for i in 0..q {
                y[(i, j)] *= s;
            }
        }
    }
    (x, y)
}

/// Draw `(𝒳, 𝒴)` from `spec`; a pure function of `(spec, seed)`.
pub fn sample_dataset(spec: &ModelSpec, seed: u64) -> Result<DataSet> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let (x_tilde, y_tilde) = sample_with(spec, &mut rng);
    Ok(DataSet {
        x_tilde,
        y_tilde,
        seed,
        spec_echo: spec.clone(),
    })
}

/// Population canonical correlation matrix
/// `(I+AAᵀ)^{-1/2} ABᵀ (I+BBᵀ)^{-1} BAᵀ (I+AAᵀ)^{-1/2}`.
pub fn pcc_matrix(loadings: &FactorLoadings) -> Result<Mat<f64>> {
    let (a, b) = (loadings.a(), loadings.b());
    let (p, q) = (a.nrows(), b.nrows());
    let sxx = Mat::<f64>::identity(p, p) + a * a.transpose();
    let syy = Mat::<f64>::identity(q, q) + b * b.transpose();
    let sxx_inv_sqrt = linalg::sym_apply(sxx.as_ref(), |x| x.powf(-0.5))?;
    let syy_inv = linalg::sym_apply(syy.as_ref(), f64::recip)?;
    let left = &sxx_inv_sqrt * a * b.transpose();
    let mut m = &left * &syy_inv * left.transpose();
    linalg::symmetrize(&mut m);
    Ok(m)
}

/// Squared population canonical correlations `t_1 >= … >= t_r`.
pub fn population_ccc(loadings: &FactorLoadings) -> Result<Vec<f64>> {
    let r = loadings.rank();
    let m = pcc_matrix(loadings)?;
    let vals = linalg::sym_eigenvalues_desc(m.as_ref())?;
    Ok(vals.into_iter().take(r).map(|t| t.clamp(0.0, 1.0)).collect())
}

/// `t_1 = a²b²/((1+a²)(1+b²))` for a rank-one pair sharing the right direction.
pub fn rank_one_ccc(a: f64, b: f64) -> f64 {
    let (a2, b2) = (a * a, b * b);
    a2 * b2 / ((1.0 + a2) * (1.0 + b2))
}
