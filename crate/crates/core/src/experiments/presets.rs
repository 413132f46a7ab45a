//! Ready-made configurations replaying the reference simulation study.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{run, Execution, ExperimentConfig, ExperimentResult, ScenarioKind, ScenarioSpec, Task};
use crate::error::{Error, Result};
use crate::model::{random_unit_loadings, EntryLaw, FactorLoadings, ModelSpec};
use crate::rng::derived_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Table1,
    Table2,
    Table3,
    FigHist,
    FigPower,
    FigCcc,
}

impl Target {
    pub const ALL: [Target; 6] = [
        Target::Table1,
        Target::Table2,
        Target::Table3,
        Target::FigHist,
        Target::FigPower,
        Target::FigCcc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Target::Table1 => "table1",
            Target::Table2 => "table2",
            Target::Table3 => "table3",
            Target::FigHist => "fig-hist",
            Target::FigPower => "fig-power",
            Target::FigCcc => "fig-ccc",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown target {s:?}")))
    }
}

/// Replication budget.
///
/// `paper` uses the reference replication counts; `quick` is sized for
/// routine checking; `smoke` runs a handful of replications per cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Paper,
    Quick,
    Smoke,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Paper => "paper",
            Profile::Quick => "quick",
            Profile::Smoke => "smoke",
        }
    }

    fn pick(self, paper: usize, quick: usize, smoke: usize) -> usize {
        match self {
            Profile::Paper => paper,
            Profile::Quick => quick,
            Profile::Smoke => smoke,
        }
    }
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "quick" => Ok(Profile::Quick),
            "smoke" => Ok(Profile::Smoke),
            _ => Err(Error::InvalidArgument(format!("unknown profile {s:?}"))),
        }
    }
}

/// A labelled experiment inside a reproduction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub label: String,
    pub result: ExperimentResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub target: Target,
    pub profile: Profile,
    pub seed: u64,
    pub panels: Vec<Panel>,
}

/// Evenly spaced values from `start` to `stop` inclusive, rounded to 1e-9.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let k = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=k)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

const TEST_DIMS: [(usize, usize); 2] = [(200, 200), (300, 100)];
const SCENARIOS: [ScenarioKind; 3] = [ScenarioKind::A, ScenarioKind::B, ScenarioKind::C];

fn scen_name(s: ScenarioKind) -> &'static str {
    match s {
        ScenarioKind::A => "a",
        ScenarioKind::B => "b",
        ScenarioKind::C => "c",
        ScenarioKind::Custom => "custom",
    }
}

fn cell(
    label: String,
    task: Task,
    spec: ModelSpec,
    scenario: ScenarioKind,
    reps: usize,
    seed: u64,
) -> Result<(String, ExperimentConfig)> {
    let master = derived_seed(seed, &label);
    Ok((
        label,
        ExperimentConfig::new(task, ScenarioSpec::new(spec, scenario)?, reps, master),
    ))
}

/// Rank-one loadings `A = a u vᵀ`, `B = b u' vᵀ` inside rank `r`, random directions.
fn rank_one_in(p: usize, q: usize, r: usize, a: f64, b: f64, seed: u64) -> Result<FactorLoadings> {
    let mut sa = vec![0.0; r];
    let mut sb = vec![0.0; r];
    sa[0] = a;
    sb[0] = b;
    random_unit_loadings(p, q, r, &sa, &sb, true, seed)
}

/// Experiment configurations for a target, labelled by panel.
pub fn target_configs(target: Target, profile: Profile, seed: u64) -> Result<Vec<(String, ExperimentConfig)>> {
    let law = EntryLaw::rademacher();
    let mut out = Vec::new();
    match target {
        Target::Table1 => {
            let reps = profile.pick(2000, 500, 20);
            for s in SCENARIOS {
                for (p, q) in TEST_DIMS {
                    let spec = ModelSpec::new(1000, FactorLoadings::zeros(p, q, 5), law)?;
                    out.push(cell(
                        format!("{}-{p}x{q}", scen_name(s)),
                        Task::Type1,
                        spec,
                        s,
                        reps,
                        seed,
                    )?);
                }
            }
        }
        Target::Table2 | Target::Table3 => {
            let reps = profile.pick(1000, 200, 10);
            for s in SCENARIOS {
                for (p, q) in TEST_DIMS {
                    let l = FactorLoadings::standard_basis(p, q, &[4.0, 2.0, 1.0], &[2.0, 2.0, 2.0])?;
                    let spec = ModelSpec::new(2000, l, law)?;
                    out.push(cell(
                        format!("{}-{p}x{q}", scen_name(s)),
                        Task::Rank,
                        spec,
                        s,
                        reps,
                        seed,
                    )?);
                }
            }
        }
        Target::FigHist => {
            let reps = profile.pick(5000, 300, 10);
            let std_basis = FactorLoadings::standard_basis(400, 400, &[2.0], &[2.0])?;
            let random = random_unit_loadings(
                400,
                400,
                1,
                &[2.0],
                &[2.0],
                true,
                derived_seed(seed, "loadings/b-random-directions"),
            )?;
            for (label, l) in [("a-standard-basis", std_basis), ("b-random-directions", random)] {
                let spec = ModelSpec::new(2000, l, law)?;
                out.push(cell(
                    label.to_string(),
                    Task::OutlierHist,
                    spec,
                    ScenarioKind::A,
                    reps,
                    seed,
                )?);
            }
        }
        Target::FigPower => {
            let reps = profile.pick(1000, 100, 4);
            let g = match profile {
                Profile::Paper => grid(0.0, 4.0, 0.1),
                Profile::Quick => grid(0.0, 4.0, 0.25),
                Profile::Smoke => vec![0.0, 2.0, 4.0],
            };
            for s in [ScenarioKind::A, ScenarioKind::C] {
                for (p, q) in TEST_DIMS {
                    let label = format!("{}-{p}x{q}", scen_name(s));
                    let l = rank_one_in(p, q, 5, 1.0, 2.0, derived_seed(seed, &format!("loadings/{label}")))?;
                    let spec = ModelSpec::new(1000, l, law)?;
                    let (label, cfg) = cell(label, Task::Power, spec, s, reps, seed)?;
                    out.push((label, cfg.with_grid(g.clone())));
                }
            }
        }
        Target::FigCcc => {
            let g = match profile {
                Profile::Paper => grid(1.0, 4.0, 0.05),
                Profile::Quick => grid(1.0, 4.0, 0.25),
                Profile::Smoke => vec![1.0, 2.5, 4.0],
            };
            let l = rank_one_in(400, 400, 1, 1.0, 2.0, derived_seed(seed, "loadings/ccc"))?;
            let spec = ModelSpec::new(2000, l, law)?;
            let (label, cfg) = cell("a-400x400".into(), Task::CccCurve, spec, ScenarioKind::A, 1, seed)?;
            out.push((label, cfg.with_grid(g)));
        }
    }
    Ok(out)
}

/// Run all panels of a target.
pub fn reproduce(target: Target, profile: Profile, seed: u64, exec: Execution) -> Result<Reproduction> {
    let panels = target_configs(target, profile, seed)?
        .into_iter()
        .map(|(label, cfg)| {
            Ok(Panel {
                label,
                result: run(&cfg, exec)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Reproduction {
        target,
        profile,
        seed,
        panels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(grid(0.0, 4.0, 0.25).len(), 17);
        assert_eq!(grid(1.0, 4.0, 0.05).len(), 61);
        assert_eq!(grid(0.0, 4.0, 0.1)[3], 0.3);
    }

    #[test]
    fn names_round_trip() {
        for t in Target::ALL {
            assert_eq!(t.name().parse::<Target>().unwrap(), t);
        }
        assert!("table9".parse::<Target>().is_err());
        assert_eq!("quick".parse::<Profile>().unwrap(), Profile::Quick);
    }

    #[test]
    fn panel_shapes() {
        assert_eq!(target_configs(Target::Table1, Profile::Quick, 1).unwrap().len(), 6);
        let power = target_configs(Target::FigPower, Profile::Smoke, 1).unwrap();
        assert_eq!(power.len(), 4);
        let (_, cfg) = &power[0];
        let t = crate::model::population_ccc(&cfg.scenario.model_at(Some(2.0)).loadings).unwrap();
        assert!((t[0] - 0.64).abs() < 1e-12);
        let rank = target_configs(Target::Table2, Profile::Smoke, 1).unwrap();
        assert_eq!(rank[4].1.scenario.base.heterogeneity.as_ref().unwrap()[0], 2.0);
    }
}
