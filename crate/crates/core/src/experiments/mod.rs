//! Monte-Carlo harness: replicated simulations of the tests and estimators.
//!
//! Replications are independent work items seeded by
//! [`replication_seed`](crate::rng::replication_seed); results are collected
//! in replication order and aggregated sequentially, so the output does not
//! depend on how many worker threads ran them.

mod exec;
mod output;
mod presets;
pub mod stats;

pub use exec::Execution;
pub use output::{write_reproduction, RunManifest, REPS_CSV_COLUMNS};
pub use presets::{reproduce, Profile, Reproduction, Target};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{self, default_omega1, default_omega_o};
use crate::limits::{self, tw1_quantile, FourthCumulants, VTermConvention};
use crate::model::{self, sample_dataset, ModelSpec};
use crate::rng::replication_seed;
use crate::spectrum::scc_spectrum;
use crate::theory::TheoryContext;
use stats::KsTest;

/// Leading eigenvalues stored per replication.
pub const HEAD_LEN: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Homogeneous samples.
    A,
    /// `Σ^{1/2} = diag(1.2, …, 1.2, 1, …, 1)`, halves of length `n/2`.
    B,
    /// `Σ^{1/2} = diag(2, …, 2, 1, …, 1)`.
    C,
    /// Heterogeneity taken verbatim from the base spec.
    Custom,
}

/// Diagonal of `Σ^{1/2}` for the named scenarios.
pub fn scenario_heterogeneity(kind: ScenarioKind, n: usize) -> Option<Vec<f64>> {
    let half = |s: f64| Some((0..n).map(|j| if j < n / 2 { s } else { 1.0 }).collect());
    match kind {
        ScenarioKind::A | ScenarioKind::Custom => None,
        ScenarioKind::B => half(1.2),
        ScenarioKind::C => half(2.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub base: ModelSpec,
    pub scenario: ScenarioKind,
}

impl ScenarioSpec {
    pub fn new(mut base: ModelSpec, scenario: ScenarioKind) -> Result<Self> {
        if scenario != ScenarioKind::Custom {
            base.heterogeneity = scenario_heterogeneity(scenario, base.n);
        }
        base.validate()?;
        Ok(Self { base, scenario })
    }

    /// The model with `A` scaled by `a` (grid tasks) or the base model.
    pub fn model_at(&self, a: Option<f64>) -> ModelSpec {
        match a {
            Some(s) => ModelSpec {
                loadings: self.base.loadings.with_a_scaled(s),
                ..self.base.clone()
            },
            None => self.base.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Type1,
    Power,
    Rank,
    OutlierHist,
    CccCurve,
}

impl Task {
    pub fn tag(self) -> &'static str {
        match self {
            Task::Type1 => "type1",
            Task::Power => "power",
            Task::Rank => "rank",
            Task::OutlierHist => "outlier-hist",
            Task::CccCurve => "ccc-curve",
        }
    }

    fn uses_grid(self) -> bool {
        matches!(self, Task::Power | Task::CccCurve)
    }
}

/// Statistic and estimator settings shared by the tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskParams {
    pub alpha: f64,
    pub r0: usize,
    /// `r*` of the gap-ratio test.
    pub r_star_test: usize,
    /// Critical value of the gap-ratio test.
    pub onatski_critical: f64,
    /// `r*` of the gap-ratio rank estimator.
    pub r_star_rank: usize,
    /// `None` selects `n^{-1/2}`.
    pub omega1: Option<f64>,
    /// `None` selects `min(p, q)^{1/2}`.
    pub omega_o: Option<f64>,
    pub v_term: VTermConvention,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            r0: 0,
            r_star_test: 3,
            onatski_critical: 4.86,
            r_star_rank: 10,
            omega1: None,
            omega_o: None,
            v_term: VTermConvention::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub scenario: ScenarioSpec,
    pub reps: usize,
    pub master_seed: u64,
    /// Values of the scale `a` applied to `A` (power and CCC-curve tasks).
    pub grid: Option<Vec<f64>>,
    pub params: TaskParams,
}

impl ExperimentConfig {
    pub fn new(task: Task, scenario: ScenarioSpec, reps: usize, master_seed: u64) -> Self {
        Self {
            task,
            scenario,
            reps,
            master_seed,
            grid: None,
            params: TaskParams::default(),
        }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        self.scenario.base.validate()?;
        match (&self.grid, self.task.uses_grid()) {
            (Some(g), true) if g.is_empty() => Err(Error::InvalidArgument("grid is empty".into())),
            (Some(g), _) if g.iter().any(|v| !v.is_finite()) => {
                Err(Error::InvalidArgument("grid values must be finite".into()))
            }
            (None, true) => Err(Error::InvalidArgument(format!("task {} needs a grid", self.task.tag()))),
            _ => Ok(()),
        }
    }

    fn points(&self) -> Vec<Option<f64>> {
        match (&self.grid, self.task.uses_grid()) {
            (Some(g), true) => g.iter().map(|&a| Some(a)).collect(),
            _ => vec![None],
        }
    }
}

/// One replication. Fields not produced by the task are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub index: usize,
    pub seed: u64,
    pub grid_value: Option<f64>,
    pub stat_tw: Option<f64>,
    pub stat_onatski: Option<f64>,
    pub reject_tw: Option<bool>,
    pub reject_onatski: Option<bool>,
    pub r_hat_threshold: Option<usize>,
    pub r_hat_ratio: Option<usize>,
    pub t_hat: Option<f64>,
    pub clamped: Option<bool>,
    /// Leading eigenvalues `λ̃_1, …` (at most [`HEAD_LEN`]).
    pub head: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankCounts {
    pub under: usize,
    pub correct: usize,
    pub over: usize,
}

impl RankCounts {
    fn add(&mut self, r_hat: usize, truth: usize) {
        match r_hat.cmp(&truth) {
            std::cmp::Ordering::Less => self.under += 1,
            std::cmp::Ordering::Equal => self.correct += 1,
            std::cmp::Ordering::Greater => self.over += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.under + self.correct + self.over
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub a: f64,
    pub t1: f64,
    pub reps: usize,
    pub rate_tw: f64,
    pub rate_onatski: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CccPoint {
    pub a: f64,
    pub t_true: f64,
    pub reps: usize,
    pub t_hat_mean: f64,
    pub max_abs_error: f64,
    pub clamped: usize,
}

/// Reference laws for the top outlier and how the samples compare.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierSummary {
    pub t1: f64,
    pub theta1: f64,
    pub mean: f64,
    pub variance: f64,
    /// `a(t₁)² C₁₁,₁₁` from the loading geometry and entry cumulants.
    pub sigma_sq_theory: f64,
    /// Closed form for coordinate-axis directions.
    pub sigma_a_sq: f64,
    /// Closed form for delocalized directions.
    pub sigma_b_sq: f64,
    /// `2 c_g(t₁)`, the Gaussian-entry prediction.
    pub sigma_sq_gaussian: f64,
    pub ks_theory: KsTest,
    pub ks_gaussian: KsTest,
    pub samples: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Aggregates {
    Type1 {
        reps: usize,
        critical_tw: f64,
        critical_onatski: f64,
        rejections_tw: usize,
        rejections_onatski: usize,
        rate_tw: f64,
        rate_onatski: f64,
    },
    Power {
        /// Value of `a` where `t₁` crosses `t_c`, when it does.
        a_c: Option<f64>,
        points: Vec<PowerPoint>,
    },
    Rank {
        true_rank: usize,
        omega1: f64,
        omega_o: f64,
        r_star: usize,
        threshold: RankCounts,
        ratio: RankCounts,
    },
    OutlierHist(Box<OutlierSummary>),
    CccCurve {
        points: Vec<CccPoint>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub library_version: String,
    pub rng_algorithm: String,
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub aggregates: Aggregates,
    pub records: Vec<RepRecord>,
    /// Wall time of the run; kept out of the serialized result so that
    /// identical runs serialize identically.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl ExperimentResult {
    pub fn seeds(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.seed).collect()
    }
}

/// Everything a replication needs, computed once per experiment.
struct Prepared {
    models: Vec<ModelSpec>,
    ctx: TheoryContext,
    crit_tw: f64,
    omega1: f64,
    omega_o: f64,
}

fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let base = &config.scenario.base;
    let ctx = TheoryContext::from_dims(base.p, base.q, base.n)?;
    let models = config
        .points()
        .into_iter()
        .map(|a| config.scenario.model_at(a))
        .collect();
    let p = &config.params;
    Ok(Prepared {
        models,
        ctx,
        crit_tw: tw1_quantile(1.0 - p.alpha)?,
        omega1: p.omega1.unwrap_or_else(|| default_omega1(base.n)),
        omega_o: p.omega_o.unwrap_or_else(|| default_omega_o(base.p.min(base.q))),
    })
}

fn run_one(config: &ExperimentConfig, prep: &Prepared, index: usize) -> Result<RepRecord> {
    let point = index / config.reps;
    let spec = &prep.models[point];
    let seed = replication_seed(config.master_seed, index as u64, config.task.tag());
    let data = sample_dataset(spec, seed)?;
    let spectrum = scc_spectrum(data.x_tilde.as_ref(), data.y_tilde.as_ref())?;
    let p = &config.params;
    let mut rec = RepRecord {
        index,
        seed,
        grid_value: config
            .grid
            .as_ref()
            .filter(|_| config.task.uses_grid())
            .map(|g| g[point]),
        stat_tw: None,
        stat_onatski: None,
        reject_tw: None,
        reject_onatski: None,
        r_hat_threshold: None,
        r_hat_ratio: None,
        t_hat: None,
        clamped: None,
        head: spectrum.values.iter().take(HEAD_LEN).copied().collect(),
    };
    match config.task {
        Task::Type1 | Task::Power => {
            let tw = inference::stat_tw(&spectrum, &prep.ctx, spec.n, p.r0)?;
            let on = inference::stat_onatski(&spectrum, p.r0, p.r_star_test)?;
            rec.stat_tw = Some(tw);
            rec.stat_onatski = Some(on);
            rec.reject_tw = Some(tw >= prep.crit_tw);
            rec.reject_onatski = Some(on >= p.onatski_critical);
        }
        Task::Rank => {
            rec.r_hat_threshold = Some(inference::estimate_rank_threshold(&spectrum, &prep.ctx, prep.omega1)?.r_hat);
            rec.r_hat_ratio = Some(inference::estimate_rank_ratio(&spectrum, prep.omega_o, p.r_star_rank)?.r_hat);
        }
        Task::OutlierHist => {}
        Task::CccCurve => {
            let est = inference::estimate_ccc(&spectrum, &prep.ctx, 1)?[0];
            rec.t_hat = Some(est.t_hat);
            rec.clamped = Some(est.clamped);
        }
    }
    Ok(rec)
}

fn count(records: &[RepRecord], f: impl Fn(&RepRecord) -> Option<bool>) -> usize {
    records.iter().filter(|r| f(r) == Some(true)).count()
}

/// Value of `a` at which `a²b²/((1+a²)(1+b²)) = t_c`.
pub fn critical_a(b: f64, t_c: f64) -> Option<f64> {
    let beta = b * b / (1.0 + b * b);
    (beta > t_c).then(|| (t_c / (beta - t_c)).sqrt())
}

fn top_singular_value(m: faer::MatRef<'_, f64>) -> Result<f64> {
    if m.ncols() == 0 {
        return Ok(0.0);
    }
    Ok(crate::linalg::singular_values(m)?.into_iter().fold(0.0, f64::max))
}

/// Recompute the aggregates from per-replication records.
pub fn aggregate(config: &ExperimentConfig, records: &[RepRecord]) -> Result<Aggregates> {
    let prep = prepare(config)?;
    let base = &config.scenario.base;
    let ctx = &prep.ctx;
    let per_point = |k: usize| &records[k * config.reps..((k + 1) * config.reps).min(records.len())];
    Ok(match config.task {
        Task::Type1 => {
            let m = records.len();
            let (rt, ro) = (count(records, |r| r.reject_tw), count(records, |r| r.reject_onatski));
            Aggregates::Type1 {
                reps: m,
                critical_tw: prep.crit_tw,
                critical_onatski: config.params.onatski_critical,
                rejections_tw: rt,
                rejections_onatski: ro,
                rate_tw: rt as f64 / m as f64,
                rate_onatski: ro as f64 / m as f64,
            }
        }
        Task::Power => {
            let grid = config.grid.as_ref().expect("validated");
            let b = top_singular_value(base.loadings.b())?;
            let points = grid
                .iter()
                .enumerate()
                .map(|(k, &a)| {
                    let recs = per_point(k);
                    let m = recs.len() as f64;
                    Ok(PowerPoint {
                        a,
                        t1: model::population_ccc(&prep.models[k].loadings)?
                            .first()
                            .copied()
                            .unwrap_or(0.0),
                        reps: recs.len(),
                        rate_tw: count(recs, |r| r.reject_tw) as f64 / m,
                        rate_onatski: count(recs, |r| r.reject_onatski) as f64 / m,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Aggregates::Power {
                a_c: critical_a(b, ctx.threshold_tc()),
                points,
            }
        }
        Task::Rank => {
            let truth = model::population_ccc(&base.loadings)?
                .iter()
                .filter(|&&t| t > ctx.threshold_tc())
                .count();
            let mut threshold = RankCounts::default();
            let mut ratio = RankCounts::default();
            for r in records {
                threshold.add(r.r_hat_threshold.unwrap_or(0), truth);
                ratio.add(r.r_hat_ratio.unwrap_or(0), truth);
            }
            Aggregates::Rank {
                true_rank: truth,
                omega1: prep.omega1,
                omega_o: prep.omega_o,
                r_star: config.params.r_star_rank,
                threshold,
                ratio,
            }
        }
        Task::OutlierHist => Aggregates::OutlierHist(Box::new(outlier_summary(config, ctx, records)?)),
        Task::CccCurve => {
            let grid = config.grid.as_ref().expect("validated");
            let points = grid
                .iter()
                .enumerate()
                .map(|(k, &a)| {
                    let recs = per_point(k);
                    let t_true = model::population_ccc(&prep.models[k].loadings)?
                        .first()
                        .copied()
                        .unwrap_or(0.0);
                    let hats: Vec<f64> = recs.iter().filter_map(|r| r.t_hat).collect();
                    Ok(CccPoint {
                        a,
                        t_true,
                        reps: recs.len(),
                        t_hat_mean: hats.iter().sum::<f64>() / hats.len().max(1) as f64,
                        max_abs_error: hats.iter().map(|h| (h - t_true).abs()).fold(0.0, f64::max),
                        clamped: count(recs, |r| r.clamped),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Aggregates::CccCurve { points }
        }
    })
}

fn outlier_summary(config: &ExperimentConfig, ctx: &TheoryContext, records: &[RepRecord]) -> Result<OutlierSummary> {
    let base = &config.scenario.base;
    let t = model::population_ccc(&base.loadings)?;
    let t1 = t.first().copied().unwrap_or(0.0);
    let theta1 = ctx.outlier_location(t1)?;
    let cumulants = FourthCumulants::from(&base.entry_law);
    let frame = limits::reference_frame(&base.loadings)?;
    let c11 = limits::covariance_c(&frame, t1, ctx, cumulants, config.params.v_term, (0, 0), (0, 0))?;
    let sigma_sq_theory = ctx.a_of_t(t1).powi(2) * c11;
    let a = top_singular_value(base.loadings.a())?;
    let b = top_singular_value(base.loadings.b())?;
    let sigma_a_sq = limits::sigma_a_sq(ctx, a, b, cumulants)?;
    let sigma_b_sq = limits::sigma_b_sq(ctx, a, b, cumulants)?;
    let sigma_sq_gaussian = 2.0 * ctx.c_g(t1);
    let samples: Vec<f64> = records.iter().filter_map(|r| r.head.first().copied()).collect();
    let (mean, variance) = stats::mean_var(&samples);
    let n = base.n as f64;
    Ok(OutlierSummary {
        t1,
        theta1,
        mean,
        variance,
        sigma_sq_theory,
        sigma_a_sq,
        sigma_b_sq,
        sigma_sq_gaussian,
        ks_theory: stats::ks_test_normal(&samples, theta1, sigma_sq_theory / n)?,
        ks_gaussian: stats::ks_test_normal(&samples, theta1, sigma_sq_gaussian / n)?,
        samples,
    })
}

/// Run every replication of `config` and aggregate.
pub fn run(config: &ExperimentConfig, exec: Execution) -> Result<ExperimentResult> {
    let start = std::time::Instant::now();
    let prep = prepare(config)?;
    let mut warnings = Vec::new();
    if config.task == Task::Type1 {
        let t = model::population_ccc(&config.scenario.base.loadings)?;
        if t.iter().any(|&v| v > 1e-12) {
            warnings.push(format!(
                "type-I error run on a model with nonzero population CCCs {t:?}; rates measure power"
            ));
        }
    }
    let total = config.reps * prep.models.len();
    let records = exec.map(total, |i| run_one(config, &prep, i))?;
    let aggregates = aggregate(config, &records)?;
    Ok(ExperimentResult {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        rng_algorithm: crate::rng::RNG_ALGORITHM.to_string(),
        config: config.clone(),
        warnings,
        aggregates,
        records,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn expect_task(config: &ExperimentConfig, task: Task) -> Result<()> {
    if config.task != task {
        return Err(Error::InvalidArgument(format!(
            "config is for task {}, not {}",
            config.task.tag(),
            task.tag()
        )));
    }
    Ok(())
}

/// Rejection rates of both tests under the null.
pub fn run_type1(config: &ExperimentConfig, exec: Execution) -> Result<ExperimentResult> {
    expect_task(config, Task::Type1)?;
    run(config, exec)
}

/// Power curves over the grid of `a`.
pub fn run_power(config: &ExperimentConfig, exec: Execution) -> Result<ExperimentResult> {
    expect_task(config, Task::Power)?;
    run(config, exec)
}

/// Under/correct/over counts of both rank estimators.
pub fn run_rank(config: &ExperimentConfig, exec: Execution) -> Result<ExperimentResult> {
    expect_task(config, Task::Rank)?;
    run(config, exec)
}

/// Samples of `λ̃₁` against its limiting normal laws.
pub fn run_outlier_hist(config: &ExperimentConfig, exec: Execution) -> Result<ExperimentResult> {
    expect_task(config, Task::OutlierHist)?;
    run(config, exec)
}

/// `(t₁, t̂₁)` over the grid of `a`.
pub fn run_ccc_curve(config: &ExperimentConfig, exec: Execution) -> Result<ExperimentResult> {
    expect_task(config, Task::CccCurve)?;
    run(config, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntryLaw, FactorLoadings};

    fn small(task: Task, loadings: FactorLoadings) -> ExperimentConfig {
        let spec = ModelSpec::new(120, loadings, EntryLaw::rademacher()).unwrap();
        ExperimentConfig::new(task, ScenarioSpec::new(spec, ScenarioKind::A).unwrap(), 6, 42)
    }

    #[test]
    fn scenarios() {
        assert!(scenario_heterogeneity(ScenarioKind::A, 10).is_none());
        let c = scenario_heterogeneity(ScenarioKind::C, 10).unwrap();
        assert_eq!(c, vec![2.0, 2.0, 2.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(scenario_heterogeneity(ScenarioKind::B, 4).unwrap()[1], 1.2);
    }

    #[test]
    fn critical_a_value() {
        assert!((critical_a(2.0, 0.25).unwrap() - (5.0f64 / 11.0).sqrt()).abs() < 1e-15);
        assert!(critical_a(0.1, 0.25).is_none());
    }

    #[test]
    fn type1_single_rep_rate_is_binary() {
        let mut cfg = small(Task::Type1, FactorLoadings::zeros(20, 20, 1));
        cfg.reps = 1;
        let res = run_type1(&cfg, Execution::Sequential).unwrap();
        match res.aggregates {
            Aggregates::Type1 {
                rate_tw, rate_onatski, ..
            } => {
                assert!(rate_tw == 0.0 || rate_tw == 1.0);
                assert!(rate_onatski == 0.0 || rate_onatski == 1.0);
            }
            _ => panic!("wrong aggregate"),
        }
        assert!(res.warnings.is_empty());
    }

    #[test]
    fn spiked_type1_warns() {
        let l = FactorLoadings::standard_basis(20, 20, &[3.0], &[3.0]).unwrap();
        let res = run_type1(&small(Task::Type1, l), Execution::Sequential).unwrap();
        assert_eq!(res.warnings.len(), 1);
    }

    #[test]
    fn grid_tasks_need_grid() {
        let cfg = small(Task::Power, FactorLoadings::zeros(20, 20, 1));
        assert!(run_power(&cfg, Execution::Sequential).is_err());
        assert!(run_rank(&cfg, Execution::Sequential).is_err());
    }

    #[test]
    fn seeds_unique_and_aggregation_idempotent() {
        let l = FactorLoadings::standard_basis(20, 20, &[1.0], &[2.0]).unwrap();
        let cfg = small(Task::CccCurve, l).with_grid(vec![0.5, 2.0, 4.0]);
        let res = run_ccc_curve(&cfg, Execution::Sequential).unwrap();
        let mut seeds = res.seeds();
        assert_eq!(seeds.len(), 18);
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 18);
        assert_eq!(aggregate(&cfg, &res.records).unwrap(), res.aggregates);
    }

    #[test]
    fn rank_counts_sum_to_reps() {
        let l = FactorLoadings::standard_basis(20, 20, &[4.0, 2.0], &[2.0, 2.0]).unwrap();
        let mut cfg = small(Task::Rank, l);
        cfg.params.r_star_rank = 4;
        let res = run_rank(&cfg, Execution::Sequential).unwrap();
        match res.aggregates {
            Aggregates::Rank { threshold, ratio, .. } => {
                assert_eq!(threshold.total(), 6);
                assert_eq!(ratio.total(), 6);
            }
            _ => panic!("wrong aggregate"),
        }
    }
}
