//! Fluctuations of outlier eigenvalues and of the spectral edge.
//!
//! An outlier group `γ(l)` of near-equal supercritical `t_i` fluctuates at
//! scale `n^{-1/2}` like the eigenvalues of
//! `a(t_l)·√n·[diag(t) - t_l] + a(t_l)·Υ_l`, where `Υ_l` is a symmetric
//! Gaussian matrix whose covariance [`covariance_c`] depends on the fourth
//! cumulants of the noise and on the loading geometry ([`ReferenceFrame`]).

mod edge;

pub use edge::{
    goe_top_eigenvalues, onatski_critical, onatski_critical_cached, onatski_ratio, tw1_quantile,
    tw1_simulated_quantiles, wishart_top_eigenvalues, OnatskiRequest, ReferenceEnsemble, TW1_TABLE,
};

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{EntryLaw, FactorLoadings};
use crate::rng::rng_from_seed;
use crate::theory::TheoryContext;

/// Default exponent slack in the grouping radius `n^{-1/2+δ}`.
pub const DEFAULT_DELTA: f64 = 0.1;
/// Default distance kept from `t_c` and from 1 by an anchor.
pub const DEFAULT_DELTA_L: f64 = 0.05;
/// Floor applied to singular values of the loadings before forming `Σ̂`.
pub const SIGMA_EPS: f64 = 1e-14;
/// Most negative covariance eigenvalue repaired to zero.
pub const PSD_SLACK: f64 = 1e-10;

/// Indices (0-based) of near-degenerate supercritical population CCCs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeGroup {
    pub anchor: usize,
    pub members: Vec<usize>,
    pub t_values: Vec<f64>,
}

impl SpikeGroup {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn t_anchor(&self) -> f64 {
        let pos = self
            .members
            .iter()
            .position(|&m| m == self.anchor)
            .expect("anchor is a member");
        self.t_values[pos]
    }

    /// A single-spike group, the common case.
    pub fn singleton(index: usize, t: f64) -> Self {
        Self {
            anchor: index,
            members: vec![index],
            t_values: vec![t],
        }
    }
}

/// Partition the regular supercritical indices into groups.
///
/// Index `i` is eligible when `t_c + δ_l < t_i < 1 - δ_l`; eligible indices
/// whose values chain together in steps of at most `n^{-1/2+δ}` share a
/// group. The anchor of a group is its first (largest) member.
pub fn spike_groups(t_values: &[f64], ctx: &TheoryContext, n: usize, delta: f64, delta_l: f64) -> Vec<SpikeGroup> {
    let tc = ctx.threshold_tc();
    let radius = (n as f64).powf(-0.5 + delta);
    let mut eligible: Vec<usize> = (0..t_values.len())
        .filter(|&i| t_values[i] > tc + delta_l && t_values[i] < 1.0 - delta_l)
        .collect();
    eligible.sort_by(|&i, &j| t_values[j].total_cmp(&t_values[i]).then(i.cmp(&j)));
    let mut groups: Vec<SpikeGroup> = Vec::new();
    let mut last_t = f64::NAN;
    for i in eligible {
        let t = t_values[i];
        match groups.last_mut() {
            Some(g) if (last_t - t).abs() <= radius => {
                g.members.push(i);
                g.t_values.push(t);
            }
            _ => groups.push(SpikeGroup::singleton(i, t)),
        }
        last_t = t;
    }
    groups
}

/// Loading geometry entering the outlier covariance.
///
/// With `A = U_a Σ_a V_aᵀ`, `B = U_b Σ_b V_bᵀ`, `Σ̂ = Σ (I+Σ²)^{-1/2}` and
/// `M_r = V_aᵀ V_b`, the SVD `Σ̂_a M_r Σ̂_b = O diag(√t) Õᵀ` fixes the
/// rotations `O`, `Õ`. Then `𝒰 = U_a (I+Σ_a²)^{-1/2} O`,
/// `𝒱 = U_b (I+Σ_b²)^{-1/2} Õ`, and `𝒲` is built from
/// `P_a = V_a Σ̂_a O`, `P_b = V_b Σ̂_b Õ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceFrame {
    pub sigma_hat_a: Vec<f64>,
    pub sigma_hat_b: Vec<f64>,
    pub m_r: Mat<f64>,
    pub o: Mat<f64>,
    pub o_tilde: Mat<f64>,
    /// Singular values `√t_1 >= … >= √t_r`.
    pub sqrt_t: Vec<f64>,
    pub u_cal: Mat<f64>,
    pub v_cal: Mat<f64>,
    pub p_a: Mat<f64>,
    pub p_b: Mat<f64>,
}

fn thin_svd_desc(m: &Mat<f64>) -> Result<(Mat<f64>, Vec<f64>, Mat<f64>)> {
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("singular value decomposition failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let k = s.nrows();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let (u, v) = (svd.U(), svd.V());
    let uu = Mat::from_fn(u.nrows(), k, |i, j| u[(i, order[j])]);
    let vv = Mat::from_fn(v.nrows(), k, |i, j| v[(i, order[j])]);
    Ok((uu, order.iter().map(|&i| s[i]).collect(), vv))
}

fn scale_cols(m: &Mat<f64>, d: &[f64]) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[j])
}

pub fn reference_frame(loadings: &FactorLoadings) -> Result<ReferenceFrame> {
    let r = loadings.rank();
    if r == 0 {
        return Err(Error::InvalidArgument("reference frame needs rank r >= 1".into()));
    }
    let a = loadings.a().to_owned();
    let b = loadings.b().to_owned();
    let (ua, sa, va) = thin_svd_desc(&a)?;
    let (ub, sb, vb) = thin_svd_desc(&b)?;
    let hat = |s: &[f64]| -> Vec<f64> {
        s.iter()
            .map(|&x| {
                let x = x.max(SIGMA_EPS);
                x / (1.0 + x * x).sqrt()
            })
            .collect()
    };
    let inv_root = |s: &[f64]| -> Vec<f64> { s.iter().map(|&x| (1.0 + x * x).sqrt().recip()).collect() };
    let (sha, shb) = (hat(&sa), hat(&sb));
    let m_r = va.transpose() * &vb;
    let core = Mat::from_fn(r, r, |i, j| sha[i] * m_r[(i, j)] * shb[j]);
    let (o, sqrt_t, o_tilde) = thin_svd_desc(&core)?;
    let u_cal = scale_cols(&ua, &inv_root(&sa)) * &o;
    let v_cal = scale_cols(&ub, &inv_root(&sb)) * &o_tilde;
    let p_a = scale_cols(&va, &sha) * &o;
    let p_b = scale_cols(&vb, &shb) * &o_tilde;
    Ok(ReferenceFrame {
        sigma_hat_a: sha,
        sigma_hat_b: shb,
        m_r,
        o,
        o_tilde,
        sqrt_t,
        u_cal,
        v_cal,
        p_a,
        p_b,
    })
}

impl ReferenceFrame {
    pub fn rank(&self) -> usize {
        self.o.nrows()
    }

    /// Population CCCs `t_i` recovered from the frame's SVD.
    pub fn t_values(&self) -> Vec<f64> {
        self.sqrt_t.iter().map(|s| s * s).collect()
    }

    /// `𝒲_{k,ij}(t_l)`.
    pub fn w(&self, k: usize, i: usize, j: usize, t_l: f64) -> f64 {
        let (pa, pb) = (&self.p_a, &self.p_b);
        t_l * pa[(k, i)] * pa[(k, j)] + t_l * pb[(k, i)] * pb[(k, j)]
            - t_l.sqrt() * (pa[(k, i)] * pb[(k, j)] + pb[(k, i)] * pa[(k, j)])
    }

    /// The full `r × r × r` tensor, indexed `[k][i][j]`.
    pub fn w_tensor(&self, t_l: f64) -> Vec<Vec<Vec<f64>>> {
        let r = self.rank();
        (0..r)
            .map(|k| (0..r).map(|i| (0..r).map(|j| self.w(k, i, j, t_l)).collect()).collect())
            .collect()
    }

    /// `‖Σ̂_a M_r Σ̂_b - O diag(√t) Õᵀ‖_max`.
    pub fn svd_residual(&self) -> f64 {
        let r = self.rank();
        let core = Mat::from_fn(r, r, |i, j| {
            self.sigma_hat_a[i] * self.m_r[(i, j)] * self.sigma_hat_b[j]
        });
        let recon = scale_cols(&self.o, &self.sqrt_t) * self.o_tilde.transpose();
        linalg::max_abs_diff(core.as_ref(), recon.as_ref())
    }
}

/// Fourth-cumulant excesses `μ⁽⁴⁾ - 3` of the three noise sources.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourthCumulants {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FourthCumulants {
    pub const GAUSSIAN: Self = Self { x: 0.0, y: 0.0, z: 0.0 };
    pub const RADEMACHER: Self = Self {
        x: -2.0,
        y: -2.0,
        z: -2.0,
    };
}

impl From<&EntryLaw> for FourthCumulants {
    fn from(law: &EntryLaw) -> Self {
        Self {
            x: law.excess_x,
            y: law.excess_y,
            z: law.excess_z,
        }
    }
}

/// Whether the `𝒱` fourth-cumulant term carries the `t_l²` prefactor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VTermConvention {
    /// `t_l² (μ_y⁽⁴⁾ - 3) Σ_k 𝒱𝒱𝒱𝒱`, symmetric with the `𝒰` term.
    #[default]
    WithTl2,
    /// `(μ_y⁽⁴⁾ - 3) Σ_k 𝒱𝒱𝒱𝒱` without the prefactor.
    WithoutTl2,
}

/// The Gaussian part of `C_{ij,i'j'}` without the Kronecker deltas.
pub fn gaussian_coefficient(ctx: &TheoryContext, t: f64) -> f64 {
    let (c1, c2) = (ctx.c1(), ctx.c2());
    let tc = ctx.threshold_tc();
    (1.0 - t).powi(2) * t * t / (t * t - tc * tc) * (2.0 * t + c1 / (1.0 - c1) + c2 / (1.0 - c2))
}

fn check_supercritical(ctx: &TheoryContext, t: f64) -> Result<()> {
    let tc = ctx.threshold_tc();
    if !(t > tc && t <= 1.0) {
        return Err(Error::domain("covariance_c", t, format!("t_c = {tc} < t_l <= 1")));
    }
    Ok(())
}

fn check_member(frame: &ReferenceFrame, idx: &[usize]) -> Result<()> {
    if let Some(&bad) = idx.iter().find(|&&i| i >= frame.rank()) {
        return Err(Error::InvalidArgument(format!(
            "index {bad} outside rank {}",
            frame.rank()
        )));
    }
    Ok(())
}

/// `C_{ij,i'j'}(t_l)`, evaluated at the group's anchor value.
#[allow(clippy::too_many_arguments)]
pub fn covariance_c(
    frame: &ReferenceFrame,
    t_l: f64,
    ctx: &TheoryContext,
    cumulants: FourthCumulants,
    convention: VTermConvention,
    (i, j): (usize, usize),
    (ip, jp): (usize, usize),
) -> Result<f64> {
    check_supercritical(ctx, t_l)?;
    check_member(frame, &[i, j, ip, jp])?;
    let delta = |u: usize, v: usize| if u == v { 1.0 } else { 0.0 };
    let mut c = gaussian_coefficient(ctx, t_l) * (delta(i, ip) * delta(j, jp) + delta(i, jp) * delta(j, ip));
    let quartic = |m: &Mat<f64>| -> f64 {
        (0..m.nrows())
            .map(|k| m[(k, i)] * m[(k, ip)] * m[(k, j)] * m[(k, jp)])
            .sum()
    };
    if cumulants.x != 0.0 {
        c += t_l * t_l * cumulants.x * quartic(&frame.u_cal);
    }
    if cumulants.y != 0.0 {
        let pre = match convention {
            VTermConvention::WithTl2 => t_l * t_l,
            VTermConvention::WithoutTl2 => 1.0,
        };
        c += pre * cumulants.y * quartic(&frame.v_cal);
    }
    if cumulants.z != 0.0 {
        let s: f64 = (0..frame.rank())
            .map(|k| frame.w(k, i, j, t_l) * frame.w(k, ip, jp, t_l))
            .sum();
        c += cumulants.z * s;
    }
    Ok(c)
}

/// Limiting law of the rescaled outliers `√n(λ̃_i - θ_i)`, `i ∈ γ(l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeLimitLaw {
    pub group: SpikeGroup,
    pub t_l: f64,
    pub a_of_t: f64,
    /// Diagonal drift `a(t_l)·√n·(t_i - t_l)`.
    pub drift: Vec<f64>,
    /// Covariance over upper-triangle pairs `(i, j)`, `i <= j`, in [`Self::pairs`] order.
    pub covariance: Mat<f64>,
    factor: Mat<f64>,
}

impl SpikeLimitLaw {
    /// Group-local index pairs `(i, j)`, `i <= j`, in row-major order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        upper_pairs(self.group.len())
    }

    /// Limiting variance of a singleton group.
    pub fn variance(&self) -> f64 {
        self.a_of_t * self.a_of_t * self.covariance[(0, 0)]
    }
}

fn upper_pairs(g: usize) -> Vec<(usize, usize)> {
    (0..g).flat_map(|i| (i..g).map(move |j| (i, j))).collect()
}

/// Square-root factor `L` with `L Lᵀ = K` for a symmetric PSD `K`.
fn psd_factor(k: &Mat<f64>) -> Result<Mat<f64>> {
    let (vals, vecs) = linalg::sym_eigen_desc(k.as_ref())?;
    let roots = vals
        .iter()
        .map(|&v| {
            if v >= 0.0 {
                Ok(v.sqrt())
            } else if v >= -PSD_SLACK {
                Ok(0.0)
            } else {
                Err(Error::Numerical(format!(
                    "outlier covariance is not PSD (eigenvalue {v:e})"
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scale_cols(&vecs, &roots))
}

pub fn spike_limit_law(
    frame: &ReferenceFrame,
    group: &SpikeGroup,
    ctx: &TheoryContext,
    n: usize,
    cumulants: FourthCumulants,
    convention: VTermConvention,
) -> Result<SpikeLimitLaw> {
    let t_l = group.t_anchor();
    check_supercritical(ctx, t_l)?;
    let pairs = upper_pairs(group.len());
    let m = pairs.len();
    let mut cov = Mat::<f64>::zeros(m, m);
    for (u, &(i, j)) in pairs.iter().enumerate() {
        for (v, &(ip, jp)) in pairs.iter().enumerate().skip(u) {
            let (gi, gj, gip, gjp) = (group.members[i], group.members[j], group.members[ip], group.members[jp]);
            let c = covariance_c(frame, t_l, ctx, cumulants, convention, (gi, gj), (gip, gjp))?;
            cov[(u, v)] = c;
            cov[(v, u)] = c;
        }
    }
    from_covariance(group.clone(), t_l, ctx, n, cov)
}

/// Build a law from an explicit pair covariance (in [`SpikeLimitLaw::pairs`] order).
pub fn from_covariance(
    group: SpikeGroup,
    t_l: f64,
    ctx: &TheoryContext,
    n: usize,
    covariance: Mat<f64>,
) -> Result<SpikeLimitLaw> {
    let g = group.len();
    let m = g * (g + 1) / 2;
    if covariance.nrows() != m || covariance.ncols() != m {
        return Err(Error::DimensionMismatch(format!("pair covariance must be {m}x{m}")));
    }
    let a = ctx.a_of_t(t_l);
    let drift = group
        .t_values
        .iter()
        .map(|&t| a * (n as f64).sqrt() * (t - t_l))
        .collect();
    let factor = psd_factor(&covariance)?;
    Ok(SpikeLimitLaw {
        group,
        t_l,
        a_of_t: a,
        drift,
        covariance,
        factor,
    })
}

/// One draw of `Υ_l`.
pub fn sample_upsilon<R: Rng + ?Sized>(law: &SpikeLimitLaw, rng: &mut R) -> Mat<f64> {
    let g = law.group.len();
    let m = law.factor.nrows();
    let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let mut ups = Mat::<f64>::zeros(g, g);
    for (u, (i, j)) in upper_pairs(g).into_iter().enumerate() {
        let v: f64 = (0..m).map(|w| law.factor[(u, w)] * z[w]).sum();
        ups[(i, j)] = v;
        ups[(j, i)] = v;
    }
    ups
}

/// Descending eigenvalues of `a(t_l)·√n[diag(t) - t_l] + a(t_l)·Υ_l`.
pub fn sample_spike_eigs_with<R: Rng + ?Sized>(law: &SpikeLimitLaw, rng: &mut R) -> Result<Vec<f64>> {
    let ups = sample_upsilon(law, rng);
    let g = law.group.len();
    let m = Mat::from_fn(g, g, |i, j| {
        law.a_of_t * ups[(i, j)] + if i == j { law.drift[i] } else { 0.0 }
    });
    linalg::sym_eigenvalues_desc(m.as_ref())
}

pub fn sample_spike_eigs(law: &SpikeLimitLaw, seed: u64) -> Result<Vec<f64>> {
    sample_spike_eigs_with(law, &mut rng_from_seed(seed))
}

/// Limit law of `√n(ZZᵀ - I)`: off-diagonal variance 1, diagonal variance `μ_z⁽⁴⁾ - 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZzFluctuationLaw {
    pub r: usize,
    pub mu_z4: f64,
}

pub fn zz_fluctuation_law(r: usize, mu_z4: f64) -> Result<ZzFluctuationLaw> {
    if r == 0 {
        return Err(Error::InvalidArgument("need r >= 1".into()));
    }
    if !(mu_z4 >= 1.0) || !mu_z4.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "fourth moment {mu_z4} is below the squared variance"
        )));
    }
    Ok(ZzFluctuationLaw { r, mu_z4 })
}

impl ZzFluctuationLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Mat<f64> {
        let sd_diag = (self.mu_z4 - 1.0).sqrt();
        let mut m = Mat::<f64>::zeros(self.r, self.r);
        for i in 0..self.r {
            for j in i..self.r {
                let g: f64 = rng.sample(StandardNormal);
                let v = if i == j { sd_diag * g } else { g };
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

/// The term `t a²/(1+a²) + t b²/(1+b²) - 2√t ab/√((1+a²)(1+b²))` of the
/// rank-one variance formulas.
fn rank_one_w(t: f64, a: f64, b: f64) -> f64 {
    let (a2, b2) = (a * a, b * b);
    t * a2 / (1.0 + a2) + t * b2 / (1.0 + b2) - 2.0 * t.sqrt() * a * b / ((1.0 + a2) * (1.0 + b2)).sqrt()
}

/// Limiting variance of `√n(λ̃_1 - θ_1)` for rank-one loadings `A = a e_1`,
/// `B = b e_1` along coordinate axes.
pub fn sigma_a_sq(ctx: &TheoryContext, a: f64, b: f64, cumulants: FourthCumulants) -> Result<f64> {
    let t = crate::model::rank_one_ccc(a, b);
    check_supercritical(ctx, t)?;
    let at = ctx.a_of_t(t);
    let c = 2.0 * gaussian_coefficient(ctx, t)
        + cumulants.x * t * t / (1.0 + a * a).powi(2)
        + cumulants.y * t * t / (1.0 + b * b).powi(2)
        + cumulants.z * rank_one_w(t, a, b).powi(2);
    Ok(at * at * c)
}

/// As [`sigma_a_sq`] for delocalized (random) directions, where the `𝒰` and
/// `𝒱` terms vanish.
pub fn sigma_b_sq(ctx: &TheoryContext, a: f64, b: f64, cumulants: FourthCumulants) -> Result<f64> {
    let t = crate::model::rank_one_ccc(a, b);
    check_supercritical(ctx, t)?;
    let at = ctx.a_of_t(t);
    Ok(at * at * (2.0 * gaussian_coefficient(ctx, t) + cumulants.z * rank_one_w(t, a, b).powi(2)))
}
