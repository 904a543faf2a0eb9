//! Command-line front end. Every subcommand builds an [`ExperimentConfig`]
//! and goes through the same validation as `run --config`.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use fracnelson::nelson::Direction;
use fracnelson::young::Scheme;

use crate::config::{ExperimentConfig, SchemaErrors};
use crate::output;
use crate::run::run;
use crate::suite::{run_suite, Status, SuiteKind};

// A closed stdout (e.g. `| head`) must not turn a finished run into a panic.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_CHECK_FAILED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "fracnelson", version, about = "Stochastic derivatives of fractional and Volterra processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a JSON experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Sample an fBm or Volterra ensemble.
    Simulate(SimulateArgs),
    /// Apply a fractional operator to a `t,value` CSV.
    FracOp(FracOpArgs),
    /// Solve a fractional SDE pathwise.
    SolveSde(SolveArgs),
    /// Stochastic-derivative estimation and kernel classification.
    #[command(subcommand)]
    Nelson(NelsonCommand),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Default)]
pub struct OutputArgs {
    /// JSON report path.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// CSV rows path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Exit with status 2 when the config's expectations fail.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Hurst index of an fBm ensemble.
    #[arg(long, conflicts_with = "kernel")]
    pub hurst: Option<f64>,
    /// Volterra kernel, `fbm:H` or `threshold:c`.
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// `circulant` or `cholesky` (fBm only).
    #[arg(long)]
    pub method: Option<String>,
    /// Ensemble file; `.csv` selects CSV, anything else the binary format.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub report: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FracOpArgs {
    /// rl-integral, rl-derivative, kh, kh-inverse or oh.
    #[arg(long)]
    pub op: String,
    #[arg(long)]
    pub order: Option<f64>,
    /// left or right (Riemann-Liouville operators).
    #[arg(long)]
    pub side: Option<String>,
    #[arg(long)]
    pub hurst: Option<f64>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub report: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub hurst: f64,
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
    /// Coefficient preset: constant, linear, sine, proportional:r, vanishing:r, ou:theta.
    #[arg(long)]
    pub sigma: String,
    /// Drift override: zero, constant:c or proportional:r.
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
    /// Solution path of the first driver as `t,value` CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub report: OutputArgs,
}

#[derive(Debug, Subcommand)]
pub enum NelsonCommand {
    /// Estimate a conditional stochastic derivative across an h-ladder.
    Estimate(EstimateArgs),
    /// Classify a Volterra kernel at `t`, or compute xi over a lattice.
    ClassifyKernel(ClassifyArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// fbm:H, sde:PRESET, volterra:KERNEL or wiener:PRESET.
    #[arg(long)]
    pub process: String,
    /// present, past:k, future:k or even.
    #[arg(long, default_value = "present")]
    pub sigma_field: String,
    #[arg(long)]
    pub t: f64,
    /// Comma-separated decreasing steps.
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_direction)]
    pub direction: Option<Direction>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Driver Hurst index of sde processes.
    #[arg(long)]
    pub hurst: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Estimate on a saved ensemble (`.csv` or binary) instead of sampling.
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// fbm:H or threshold:c.
    #[arg(long)]
    pub kernel: String,
    /// Time at which to run the criterion.
    #[arg(long, required_unless_present = "xi")]
    pub t: Option<f64>,
    /// Compute the xi statistic instead.
    #[arg(long)]
    pub xi: bool,
    #[arg(long)]
    pub lattice: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteKind::Fast)]
    pub suite: SuiteKind,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Restrict to these criteria, e.g. `--only 3,4`.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    serde_json::from_value(Value::String(s.into())).map_err(|_| {
        format!("unknown scheme `{s}`; expected doss-sussmann, euler-young, milstein-young or proportional-flow")
    })
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    serde_json::from_value(Value::String(s.into()))
        .map_err(|_| format!("unknown direction `{s}`; expected forward, backward or symmetric"))
}

/// Caps the global rayon pool at `FRACNELSON_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("FRACNELSON_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .with_context(|| format!("FRACNELSON_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    Ok(())
}

fn insert(m: &mut Map<String, Value>, key: &str, v: impl serde::Serialize) {
    let v = serde_json::to_value(v).expect("plain values serialise");
    if !v.is_null() {
        m.insert(key.into(), v);
    }
}

fn with_outputs(mut m: Map<String, Value>, out: &OutputArgs, data: Option<&PathBuf>) -> Map<String, Value> {
    let mut o = Map::new();
    insert(&mut o, "json", &out.json);
    insert(&mut o, "csv", &out.csv);
    insert(&mut o, "data", data);
    if !o.is_empty() {
        m.insert("output".into(), Value::Object(o));
    }
    m
}

fn config_from(m: Map<String, Value>) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig::parse(&Value::Object(m).to_string())?)
}

fn execute(cfg: ExperimentConfig, check: bool) -> Result<u8> {
    let out = run(&cfg)?;
    out.write_outputs()?;
    let summary: Vec<String> = out.summary.iter().map(|(k, v)| format!("{k}={}", output::num(*v))).collect();
    say!(
        "{} [{}] verdict={} {}",
        cfg.label(),
        &cfg.hash()[..12],
        out.verdict.as_deref().unwrap_or("n/a"),
        summary.join(" ")
    );
    if let Some(x) = &out.expectation {
        for d in &x.details {
            say!("  expect {d}");
        }
        if check && !x.passed {
            eprintln!("expectations failed");
            return Ok(EXIT_CHECK_FAILED);
        }
    }
    Ok(EXIT_OK)
}

fn verify(a: &VerifyArgs) -> Result<u8> {
    let r = run_suite(a.suite, a.seed, &a.only);
    for c in &r.criteria {
        let status = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
            Status::Error => "ERROR",
        };
        say!("[{status}] criterion {:>2}: {} ({:.1}s)", c.id, c.title, c.seconds);
        for k in c.checks.iter().filter(|k| !k.skipped) {
            let rel = serde_json::to_value(k.relation)?.as_str().unwrap_or("").to_string();
            let mark = if k.passed { "ok" } else { "FAILED" };
            say!("      {mark:6} {}: {:.6e} {rel} {:.6e}", k.name, k.measured, k.bound);
        }
        if let Some(e) = &c.error {
            say!("      error: {e}");
        }
    }
    say!("{} passed, {} failed, {} skipped in {:.1}s", r.passed, r.failed, r.skipped, r.seconds);
    if let Some(p) = &a.json {
        let v = json!({
            "schema": output::SCHEMA,
            "version": output::VERSION,
            "suite": r,
        });
        output::write_file(p, (serde_json::to_string_pretty(&v)? + "\n").as_bytes())?;
    }
    if let Some(p) = &a.csv {
        output::write_file(p, &r.to_csv()?)?;
    }
    Ok(if r.all_passed() { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run { config, out } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = ExperimentConfig::parse(&text)?;
            if out.json.is_some() || out.csv.is_some() {
                let o = cfg.output.get_or_insert_with(Default::default);
                o.json = out.json.clone().or(o.json.take());
                o.csv = out.csv.clone().or(o.csv.take());
            }
            execute(cfg, out.check)
        }
        Command::Simulate(a) => {
            let mut m = Map::new();
            insert(&mut m, "experiment", "simulate");
            let process = match (a.hurst, &a.kernel) {
                (Some(h), None) => format!("fbm:{h}"),
                (None, Some(k)) => format!("volterra:{k}"),
                _ => bail!("simulate needs exactly one of --hurst or --kernel"),
            };
            insert(&mut m, "process", process);
            insert(&mut m, "steps", a.n);
            insert(&mut m, "paths", a.paths);
            insert(&mut m, "seed", a.seed);
            insert(&mut m, "horizon", a.horizon);
            insert(&mut m, "method", &a.method);
            execute(config_from(with_outputs(m, &a.report, Some(&a.out)))?, a.report.check)
        }
        Command::FracOp(a) => {
            let mut m = Map::new();
            insert(&mut m, "experiment", "frac-op");
            insert(&mut m, "operator", &a.op);
            insert(&mut m, "order", a.order);
            insert(&mut m, "side", &a.side);
            insert(&mut m, "hurst", a.hurst);
            insert(&mut m, "input", &a.input);
            execute(config_from(with_outputs(m, &a.report, Some(&a.out)))?, a.report.check)
        }
        Command::SolveSde(a) => {
            let mut m = Map::new();
            insert(&mut m, "experiment", "solve-sde");
            insert(&mut m, "process", &a.sigma);
            insert(&mut m, "drift", &a.b);
            insert(&mut m, "hurst", a.hurst);
            insert(&mut m, "steps", a.n);
            insert(&mut m, "paths", a.paths);
            insert(&mut m, "x0", a.x0);
            insert(&mut m, "seed", a.seed);
            insert(&mut m, "horizon", a.horizon);
            insert(&mut m, "scheme", a.scheme);
            execute(config_from(with_outputs(m, &a.report, Some(&a.out)))?, a.report.check)
        }
        Command::Nelson(NelsonCommand::Estimate(a)) => {
            let mut m = Map::new();
            insert(&mut m, "experiment", "nelson-estimate");
            insert(&mut m, "process", &a.process);
            insert(&mut m, "sigma_field", &a.sigma_field);
            insert(&mut m, "t", a.t);
            insert(&mut m, "ladder", &a.ladder);
            insert(&mut m, "direction", a.direction);
            insert(&mut m, "paths", a.paths);
            insert(&mut m, "seed", a.seed);
            insert(&mut m, "horizon", a.horizon);
            insert(&mut m, "hurst", a.hurst);
            insert(&mut m, "x0", a.x0);
            insert(&mut m, "steps", a.steps);
            insert(&mut m, "input", &a.ensemble);
            execute(config_from(with_outputs(m, &a.out, None))?, a.out.check)
        }
        Command::Nelson(NelsonCommand::ClassifyKernel(a)) => {
            let mut m = Map::new();
            insert(&mut m, "experiment", if a.xi { "xi" } else { "classify-kernel" });
            insert(&mut m, "kernel", &a.kernel);
            if !a.xi {
                insert(&mut m, "t", a.t);
            }
            insert(&mut m, "lattice", a.lattice);
            insert(&mut m, "horizon", a.horizon);
            execute(config_from(with_outputs(m, &a.out, None))?, a.out.check)
        }
        Command::Verify(a) => verify(&a),
    }
}

/// Parses arguments, runs, and maps failures to exit codes.
pub fn main_with(args: impl IntoIterator<Item = std::ffi::OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|_| dispatch(cli));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            if let Some(s) = e.downcast_ref::<SchemaErrors>() {
                eprint!("error: {s}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(EXIT_ERROR)
        }
    }
}
