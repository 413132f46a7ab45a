use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use spiked_cca::experiments::{reproduce, write_reproduction, Execution, Profile, RunManifest, Target};
use spiked_cca::inference::{self, OnatskiCritical, TestMethod};
use spiked_cca::io::{read_matrix_csv, write_matrix_csv};
use spiked_cca::model::sample_dataset;
use spiked_cca::spectrum::scc_spectrum_with;
use spiked_cca::{Error, ModelSpec, SccSpectrum, SpectrumOptions, TheoryContext};

#[derive(Parser, Debug)]
#[command(
    name = "spiked-cca",
    version,
    about = "Spectral inference for high-dimensional CCA with finite-rank signals"
)]
struct Cli {
    /// Directory for manifest.json and result files.
    #[arg(long, global = true, env = "SPIKED_CCA_OUT", default_value = "spiked-cca-out")]
    out: PathBuf,
    /// Worker threads for Monte-Carlo work (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Limiting quantities for dimension ratios (c1, c2); always prints JSON.
    Theory(TheoryArgs),
    /// Draw one data set from a model spec and write X.csv, Y.csv and its spectrum.
    Simulate(SimulateArgs),
    /// Test for at most r0 signals.
    Test(TestArgs),
    /// Estimate the number of signals.
    Rank(RankArgs),
    /// Estimate the leading population canonical correlations.
    Estimate(EstimateArgs),
    /// Replay a table or figure of the reference simulation study.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug, Serialize)]
struct TheoryArgs {
    #[arg(long)]
    c1: f64,
    #[arg(long)]
    c2: f64,
    /// Population CCCs to evaluate; repeat or separate by commas.
    #[arg(long = "t", value_delimiter = ',')]
    t: Vec<f64>,
}

#[derive(Args, Debug, Serialize)]
struct DataArgs {
    /// p x n data matrix (CSV with a `rows,cols` header).
    #[arg(long, requires = "y", conflicts_with = "spec")]
    x: Option<PathBuf>,
    /// q x n data matrix.
    #[arg(long, requires = "x")]
    y: Option<PathBuf>,
    /// Model spec (JSON) to sample the data from instead.
    #[arg(long, required_unless_present = "x")]
    spec: Option<PathBuf>,
    /// Seed for sampling from --spec (defaults to the spec's own seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Subtract row means first.
    #[arg(long)]
    center: bool,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TestKind {
    Tw,
    Onatski,
}

#[derive(Args, Debug, Serialize)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = TestKind::Tw)]
    method: TestKind,
    #[arg(long, default_value_t = 0)]
    r0: usize,
    #[arg(long = "rstar", default_value_t = 3)]
    r_star: usize,
    /// Critical value of the gap-ratio test.
    #[arg(long, default_value_t = 4.86)]
    critical: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RankKind {
    Threshold,
    Ratio,
    Both,
}

#[derive(Args, Debug, Serialize)]
struct RankArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = RankKind::Both)]
    method: RankKind,
    /// Threshold above λ+ (default n^{-1/2}).
    #[arg(long)]
    omega1: Option<f64>,
    /// Gap-ratio cut-off (default min(p, q)^{1/2}).
    #[arg(long = "omega-o")]
    omega_o: Option<f64>,
    #[arg(long = "rstar", default_value_t = 10)]
    r_star: usize,
}

#[derive(Args, Debug, Serialize)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of leading eigenvalues to invert.
    #[arg(long, default_value_t = 1)]
    k: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ProfileArg {
    Paper,
    Quick,
    Smoke,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Paper => Profile::Paper,
            ProfileArg::Quick => Profile::Quick,
            ProfileArg::Smoke => Profile::Smoke,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct ReproduceArgs {
    /// table1, table2, table3, fig-hist, fig-power or fig-ccc.
    #[arg(value_parser = parse_target)]
    #[serde(serialize_with = "target_name")]
    target: Target,
    #[arg(long, value_enum, default_value_t = ProfileArg::Quick)]
    profile: ProfileArg,
    #[arg(long, default_value_t = 20240601)]
    seed: u64,
}

fn parse_target(s: &str) -> Result<Target, String> {
    s.parse::<Target>().map_err(|e| e.to_string())
}

fn target_name<S: serde::Serializer>(t: &Target, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(t.name())
}

/// Spectrum plus the sample size it came from.
struct Loaded {
    spectrum: SccSpectrum,
    n: usize,
    source: Value,
}

fn load_spec(path: &Path) -> spiked_cca::Result<ModelSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let spec: ModelSpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })?;
    spec.validate()?;
    Ok(spec)
}

fn load(data: &DataArgs) -> spiked_cca::Result<Loaded> {
    let opts = SpectrumOptions { center: data.center };
    match (&data.x, &data.y, &data.spec) {
        (Some(xp), Some(yp), _) => {
            let x = read_matrix_csv(xp)?;
            let y = read_matrix_csv(yp)?;
            let spectrum = scc_spectrum_with(x.as_ref(), y.as_ref(), opts)?;
            Ok(Loaded {
                n: x.ncols(),
                spectrum,
                source: json!({ "x": xp, "y": yp }),
            })
        }
        (_, _, Some(sp)) => {
            let spec = load_spec(sp)?;
            let seed = data.seed.unwrap_or(spec.seed);
            let d = sample_dataset(&spec, seed)?;
            let spectrum = scc_spectrum_with(d.x_tilde.as_ref(), d.y_tilde.as_ref(), opts)?;
            Ok(Loaded {
                n: spec.n,
                spectrum,
                source: json!({ "spec": spec, "seed": seed }),
            })
        }
        _ => Err(Error::InvalidArgument("give --x and --y, or --spec".into())),
    }
}

fn head(s: &SccSpectrum, k: usize) -> &[f64] {
    &s.values[..k.min(s.len())]
}

fn theory(a: &TheoryArgs) -> spiked_cca::Result<Value> {
    let ctx = TheoryContext::new(a.c1, a.c2)?;
    let edges = ctx.edge_data();
    let spikes: Vec<Value> =
        a.t.iter()
            .map(|&t| {
                let sup = t > edges.t_c && t <= 1.0;
                json!({
                    "t": t,
                    "supercritical": sup,
                    "theta": if sup { ctx.outlier_location(t).ok() } else { None },
                    "a": sup.then(|| ctx.a_of_t(t)),
                    "c_g": sup.then(|| ctx.c_g(t)),
                })
            })
            .collect();
    Ok(json!({
        "c1": a.c1,
        "c2": a.c2,
        "t_c": edges.t_c,
        "lambda_minus": edges.lambda_minus,
        "lambda_plus": edges.lambda_plus,
        "c_tw": ctx.c_tw(),
        "density_mass": ctx.density_mass(),
        "spikes": spikes,
    }))
}

fn simulate(a: &SimulateArgs, out: &Path) -> spiked_cca::Result<Value> {
    let spec = load_spec(&a.spec)?;
    let seed = a.seed.unwrap_or(spec.seed);
    let d = sample_dataset(&spec, seed)?;
    std::fs::create_dir_all(out)?;
    write_matrix_csv(&d.x_tilde, &out.join("X.csv"))?;
    write_matrix_csv(&d.y_tilde, &out.join("Y.csv"))?;
    let spectrum = scc_spectrum_with(d.x_tilde.as_ref(), d.y_tilde.as_ref(), SpectrumOptions::default())?;
    Ok(json!({ "seed": seed, "p": spec.p, "q": spec.q, "n": spec.n, "spectrum": spectrum.values }))
}

fn test(a: &TestArgs) -> spiked_cca::Result<(Value, Value)> {
    let l = load(&a.data)?;
    let ctx = l.spectrum.theory()?;
    let method = match a.method {
        TestKind::Tw => TestMethod::Tw,
        TestKind::Onatski => TestMethod::Onatski {
            r_star: a.r_star,
            critical: OnatskiCritical::Fixed(a.critical),
        },
    };
    let outcome = inference::test_independence(&l.spectrum, &ctx, l.n, a.alpha, method, a.r0)?;
    Ok((serde_json::to_value(outcome)?, l.source))
}

fn rank(a: &RankArgs) -> spiked_cca::Result<(Value, Value)> {
    let l = load(&a.data)?;
    let ctx = l.spectrum.theory()?;
    let mut out = serde_json::Map::new();
    if matches!(a.method, RankKind::Threshold | RankKind::Both) {
        let w = a.omega1.unwrap_or_else(|| inference::default_omega1(l.n));
        let est = inference::estimate_rank_threshold(&l.spectrum, &ctx, w)?;
        out.insert("threshold".into(), serde_json::to_value(est)?);
    }
    if matches!(a.method, RankKind::Ratio | RankKind::Both) {
        let w = a
            .omega_o
            .unwrap_or_else(|| inference::default_omega_o(l.spectrum.len()));
        let est = inference::estimate_rank_ratio(&l.spectrum, w, a.r_star)?;
        out.insert("ratio".into(), serde_json::to_value(est)?);
    }
    out.insert("head".into(), json!(head(&l.spectrum, 5)));
    Ok((Value::Object(out), l.source))
}

fn estimate(a: &EstimateArgs) -> spiked_cca::Result<(Value, Value)> {
    let l = load(&a.data)?;
    let ctx = l.spectrum.theory()?;
    let est = inference::estimate_ccc(&l.spectrum, &ctx, a.k)?;
    let rows: Vec<Value> = est
        .iter()
        .zip(&l.spectrum.values)
        .map(|(e, lam)| json!({ "lambda": lam, "t_hat": e.t_hat, "clamped": e.clamped }))
        .collect();
    Ok((json!({ "estimates": rows }), l.source))
}

fn text(v: &Value) -> String {
    match v {
        Value::Object(m) => m
            .iter()
            .map(|(k, v)| format!("{k}: {}", if v.is_object() { v.to_string() } else { text(v) }))
            .collect::<Vec<_>>()
            .join("\n"),
        Value::Array(a) => a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "),
        other => other.to_string(),
    }
}

fn write_json(path: &Path, v: &Value) -> spiked_cca::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn run(cli: &Cli) -> spiked_cca::Result<()> {
    let start = Instant::now();
    let exec = Execution::from_threads(cli.threads);
    let out = &cli.out;
    std::fs::create_dir_all(out)?;
    let (name, args, result, source) = match &cli.command {
        Command::Theory(a) => ("theory", serde_json::to_value(a)?, theory(a)?, Value::Null),
        Command::Simulate(a) => ("simulate", serde_json::to_value(a)?, simulate(a, out)?, Value::Null),
        Command::Test(a) => {
            let (r, s) = test(a)?;
            ("test", serde_json::to_value(a)?, r, s)
        }
        Command::Rank(a) => {
            let (r, s) = rank(a)?;
            ("rank", serde_json::to_value(a)?, r, s)
        }
        Command::Estimate(a) => {
            let (r, s) = estimate(a)?;
            ("estimate", serde_json::to_value(a)?, r, s)
        }
        Command::Reproduce(a) => {
            let rep = reproduce(a.target, a.profile.into(), a.seed, exec)?;
            let files = write_reproduction(&rep, out)?;
            let summary = json!({
                "target": a.target.name(),
                "panels": rep.panels.iter().map(|p| json!({ "label": p.label, "aggregates": p.result.aggregates })).collect::<Vec<_>>(),
                "files": files,
            });
            ("reproduce", serde_json::to_value(a)?, summary, Value::Null)
        }
    };
    if name != "reproduce" {
        write_json(&out.join(format!("{name}.json")), &result)?;
    }
    let config = json!({ "subcommand": name, "args": args, "input": source, "out": out });
    RunManifest::new(name, exec.effective_threads(), start.elapsed().as_secs_f64(), config).write(out)?;
    if cli.json || name == "theory" {
        println!("{}", serde_json::to_string_pretty(&result)?);
    } else {
        println!("{}", text(&result));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
