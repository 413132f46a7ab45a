//! Files written for a reproduction: `result.json`, `reps.csv`, plot CSVs
//! and `manifest.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::presets::Reproduction;
use super::{Aggregates, RepRecord, HEAD_LEN};
use crate::error::Result;

/// Columns of `reps.csv`, in order. Empty cells mark values the task does not produce.
pub const REPS_CSV_COLUMNS: [&str; 17] = [
    "panel",
    "index",
    "seed",
    "grid_value",
    "stat_tw",
    "stat_onatski",
    "reject_tw",
    "reject_onatski",
    "r_hat_threshold",
    "r_hat_ratio",
    "t_hat",
    "clamped",
    "lambda1",
    "lambda2",
    "lambda3",
    "lambda4",
    "lambda5",
];

/// Run metadata that legitimately differs between identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub library_version: String,
    pub rng_algorithm: String,
    pub threads: usize,
    pub wall_time_secs: f64,
    /// Fully resolved configuration of the run.
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, threads: usize, wall_time_secs: f64, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            rng_algorithm: crate::rng::RNG_ALGORITHM.to_string(),
            threads,
            wall_time_secs,
            config,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn record_row(panel: &str, r: &RepRecord) -> Vec<String> {
    let mut row = vec![
        panel.to_string(),
        r.index.to_string(),
        r.seed.to_string(),
        opt(r.grid_value),
        opt(r.stat_tw),
        opt(r.stat_onatski),
        opt(r.reject_tw),
        opt(r.reject_onatski),
        opt(r.r_hat_threshold),
        opt(r.r_hat_ratio),
        opt(r.t_hat),
        opt(r.clamped),
    ];
    row.extend((0..HEAD_LEN).map(|k| opt(r.head.get(k))));
    row
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Plot-ready series for each target; returns the file names written.
fn write_plot_csv(rep: &Reproduction, dir: &Path) -> Result<Vec<String>> {
    let mut written = Vec::new();
    let mut power = Vec::new();
    let mut ccc = Vec::new();
    let mut hist = Vec::new();
    let mut density = Vec::new();
    let mut type1 = Vec::new();
    let mut rank = Vec::new();
    for panel in &rep.panels {
        let label = panel.label.clone();
        match &panel.result.aggregates {
            Aggregates::Type1 {
                rate_tw,
                rate_onatski,
                reps,
                ..
            } => {
                type1.push(vec![
                    label,
                    reps.to_string(),
                    rate_tw.to_string(),
                    rate_onatski.to_string(),
                ]);
            }
            Aggregates::Rank { threshold, ratio, .. } => {
                for (est, c) in [("threshold", threshold), ("ratio", ratio)] {
                    rank.push(vec![
                        label.clone(),
                        est.to_string(),
                        c.under.to_string(),
                        c.correct.to_string(),
                        c.over.to_string(),
                    ]);
                }
            }
            Aggregates::Power { a_c, points } => {
                for p in points {
                    power.push(vec![
                        label.clone(),
                        p.a.to_string(),
                        p.t1.to_string(),
                        p.rate_tw.to_string(),
                        p.rate_onatski.to_string(),
                        opt(*a_c),
                    ]);
                }
            }
            Aggregates::CccCurve { .. } => {
                let base = &panel.result.config.scenario;
                for r in &panel.result.records {
                    let a = r.grid_value.unwrap_or(f64::NAN);
                    let t_true = crate::model::population_ccc(&base.model_at(r.grid_value).loadings)?
                        .first()
                        .copied()
                        .unwrap_or(0.0);
                    ccc.push(vec![a.to_string(), t_true.to_string(), opt(r.t_hat), opt(r.clamped)]);
                }
            }
            Aggregates::OutlierHist(s) => {
                hist.extend(s.samples.iter().map(|x| vec![label.clone(), x.to_string()]));
                let n = panel.result.config.scenario.base.n as f64;
                let (sd_t, sd_g) = ((s.sigma_sq_theory / n).sqrt(), (s.sigma_sq_gaussian / n).sqrt());
                let pdf = |x: f64, sd: f64| {
                    (-(x - s.theta1).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
                };
                let half = 5.0 * sd_t.max(sd_g);
                for k in 0..=200 {
                    let x = s.theta1 - half + 2.0 * half * k as f64 / 200.0;
                    density.push(vec![
                        label.clone(),
                        x.to_string(),
                        pdf(x, sd_t).to_string(),
                        pdf(x, sd_g).to_string(),
                    ]);
                }
            }
        }
    }
    let mut emit = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<()> {
        if !rows.is_empty() {
            write_csv(&dir.join(name), header, rows)?;
            written.push(name.to_string());
        }
        Ok(())
    };
    emit("type1.csv", &["panel", "reps", "rate_tw", "rate_onatski"], type1)?;
    emit("rank.csv", &["panel", "estimator", "under", "correct", "over"], rank)?;
    emit(
        "power.csv",
        &["panel", "a", "t1", "rate_tw", "rate_onatski", "a_c"],
        power,
    )?;
    emit("ccc.csv", &["a", "t_true", "t_hat", "clamped"], ccc)?;
    emit("hist_samples.csv", &["panel", "lambda1"], hist)?;
    emit(
        "hist_density.csv",
        &["panel", "x", "density_theory", "density_gaussian"],
        density,
    )?;
    Ok(written)
}

/// Write `result.json`, `reps.csv` and the plot CSVs into `dir`.
pub fn write_reproduction(rep: &Reproduction, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let result = dir.join("result.json");
    std::fs::write(&result, serde_json::to_string_pretty(rep)? + "\n")?;
    paths.push(result);
    let reps = dir.join("reps.csv");
    write_csv(
        &reps,
        &REPS_CSV_COLUMNS,
        rep.panels
            .iter()
            .flat_map(|p| p.result.records.iter().map(move |r| record_row(&p.label, r))),
    )?;
    paths.push(reps);
    paths.extend(write_plot_csv(rep, dir)?.into_iter().map(|n| dir.join(n)));
    Ok(paths)
}
