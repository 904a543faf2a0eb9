//! Executes a resolved [`ExperimentConfig`].

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use fracnelson::frac::{op_kh, op_kh_inverse, op_oh, rl_derivative, rl_integral, Side};
use fracnelson::gaussian::{cholesky_sample, circulant_sample, io, volterra_sample, Observation, PathEnsemble};
use fracnelson::nelson::*;
use fracnelson::young::{
    doss_sussmann_solve, euler_young_solve, milstein_young_solve, proportional_flow_solve, young_residual, CoefficientSet,
    Scheme, SolutionPath,
};
use fracnelson::{FracOrder, GridFunction, HurstIndex, SeedSpec, TimeGrid};

use crate::config::{parse_functional, parse_kernel, ExperimentConfig, ExperimentKind, FracOperator, SimulationMethod};
use crate::output::{self, ReportRow, SCHEMA, VERSION};

/// Result of comparing a run with its `expect` block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectationOutcome {
    pub passed: bool,
    pub details: Vec<String>,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub verdict: Option<String>,
    pub summary: BTreeMap<String, f64>,
    pub rows: Vec<ReportRow>,
    pub result: Value,
    pub tolerances: Value,
    pub expectation: Option<ExpectationOutcome>,
    /// Grid-function or ensemble payload written to `output.data`.
    pub data: Option<Data>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub enum Data {
    Grid(GridFunction<f64>),
    Ensemble(PathEnsemble<f64>),
}

impl RunOutput {
    /// JSON envelope: schema, version, config hash, resolved config,
    /// tolerances, verdict, summary and the full result.
    pub fn report(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "version": VERSION,
            "experiment": self.config.label(),
            "config_hash": self.config.hash(),
            "config": self.config,
            "tolerances": self.tolerances,
            "verdict": self.verdict,
            "summary": self.summary,
            "expectation": self.expectation,
            "rows": self.rows,
            "result": self.result,
            "wall_clock_seconds": self.seconds,
        })
    }

    pub fn csv(&self) -> Result<Vec<u8>> {
        output::rows_to_csv(&self.rows)
    }

    pub fn data_bytes(&self, path: &Path) -> Result<Vec<u8>> {
        match &self.data {
            None => bail!("experiment `{}` produces no data file", self.config.kind()),
            Some(Data::Grid(g)) => Ok(g.to_csv().into_bytes()),
            Some(Data::Ensemble(e)) => {
                let mut buf = Vec::new();
                if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")) {
                    io::write_csv(e, &mut buf)?;
                } else {
                    io::write_binary(e, &mut buf)?;
                }
                Ok(buf)
            }
        }
    }

    /// Writes every file named in `output`.
    pub fn write_outputs(&self) -> Result<()> {
        let Some(out) = &self.config.output else { return Ok(()) };
        if let Some(p) = &out.json {
            let text = serde_json::to_string_pretty(&self.report())? + "\n";
            output::write_file(p, text.as_bytes())?;
        }
        if let Some(p) = &out.csv {
            output::write_file(p, &self.csv()?)?;
        }
        if let Some(p) = &out.data {
            output::write_file(p, &self.data_bytes(p)?)?;
        }
        Ok(())
    }
}

struct Partial {
    verdict: Option<String>,
    summary: BTreeMap<String, f64>,
    rows: Vec<ReportRow>,
    result: Value,
    tolerances: Value,
    data: Option<Data>,
}

impl Partial {
    fn new(result: Value, tolerances: Value) -> Self {
        Self {
            verdict: None,
            summary: BTreeMap::new(),
            rows: Vec::new(),
            result,
            tolerances,
            data: None,
        }
    }
}

struct Rows<'a> {
    experiment: &'a str,
    rows: Vec<ReportRow>,
}

impl Rows<'_> {
    fn push(&mut self, parameters: String, estimate: f64, se: f64, verdict: &str) {
        self.rows.push(ReportRow {
            experiment: self.experiment.to_string(),
            cell: self.rows.len(),
            parameters,
            estimate,
            se,
            verdict: verdict.to_string(),
        });
    }
}

fn g(x: f64) -> String {
    output::num(x)
}

/// Runs the experiment; expectation failures are reported, not raised.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let label = config.label();
    let p = match config.kind() {
        ExperimentKind::NelsonEstimate => nelson_estimate(config, &label)?,
        ExperimentKind::ClassifyKernel => classify_kernel(config, &label)?,
        ExperimentKind::Xi => xi(config, &label)?,
        ExperimentKind::WeakPairing => weak_pairing(config, &label)?,
        ExperimentKind::Simulate => simulate(config, &label)?,
        ExperimentKind::SolveSde => solve_sde(config, &label)?,
        ExperimentKind::FracOp => frac_op(config, &label)?,
    };
    let expectation = config.expect.as_ref().map(|x| {
        let mut details = Vec::new();
        let mut passed = true;
        if let Some(v) = &x.verdict {
            let ok = p.verdict.as_deref() == Some(v.as_str());
            passed &= ok;
            details.push(format!("verdict: expected {v}, got {}", p.verdict.as_deref().unwrap_or("none")));
        }
        if let (Some(m), Some(target), Some(tol)) = (&x.metric, x.target, x.tolerance) {
            let got = p.summary.get(m).copied().unwrap_or(f64::NAN);
            let ok = (got - target).abs() <= tol;
            passed &= ok;
            details.push(format!("{m}: expected {target} ± {tol}, got {got}"));
        }
        ExpectationOutcome { passed, details }
    });
    Ok(RunOutput {
        config: config.clone(),
        verdict: p.verdict,
        summary: p.summary,
        rows: p.rows,
        result: p.result,
        tolerances: p.tolerances,
        expectation,
        data: p.data,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn req<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
    v.clone().ok_or_else(|| anyhow!("{name} is unset"))
}

fn params(cfg: &ExperimentConfig) -> Result<EnsembleParams<f64>> {
    Ok(EnsembleParams {
        n_paths: req(&cfg.paths, "paths")?,
        seed: SeedSpec::new(req(&cfg.seed, "seed")?),
        horizon: req(&cfg.horizon, "horizon")?,
    })
}

fn verdict_name(v: Verdict) -> String {
    serde_json::to_value(v).ok().and_then(|x| x.as_str().map(str::to_string)).unwrap_or_default()
}

fn kernel_verdict_name(v: KernelVerdict) -> String {
    match v {
        KernelVerdict::Convergent => "convergent".into(),
        KernelVerdict::Divergent => "divergent".into(),
        KernelVerdict::DivergentSingularity { .. } => "divergent-singularity".into(),
        KernelVerdict::Inconclusive => "inconclusive".into(),
    }
}

/// Closed-form present-σ-field derivative where one is known.
fn present_truth(cfg: &ExperimentConfig, process: &ProcessConfig<f64>, t: f64, dir: Direction) -> Option<Box<dyn Fn(f64) -> f64>> {
    match process {
        ProcessConfig::Fbm { hurst } => {
            let hurst = *hurst;
            analytic_fbm_present(hurst, t, 1.0, dir).ok()?.value()?;
            Some(Box::new(move |x| analytic_fbm_present(hurst, t, x, dir).ok().and_then(|a| a.value()).unwrap_or(f64::NAN)))
        }
        ProcessConfig::Sde { hurst, coefficients, .. } if coefficients.ratio().is_some() && coefficients.elliptic => {
            let (h, c) = (*hurst, coefficients.clone());
            proportional_present_derivative(&c, h, t, c.x0, 0.0).ok()?;
            Some(Box::new(move |x| {
                proportional_driver(&c, t, x)
                    .and_then(|b| proportional_present_derivative(&c, h, t, x, b))
                    .unwrap_or(f64::NAN)
            }))
        }
        ProcessConfig::Wiener { coefficients, .. } => {
            let preset = cfg.process.as_deref()?.strip_prefix("wiener:")?;
            let x0 = coefficients.x0;
            let density = match preset.split_once(':') {
                Some(("ou", th)) => DensityModel::ou(th.parse().ok()?, x0).ok()?,
                None if preset == "constant" => DensityModel::brownian(x0),
                _ => return None,
            };
            let c = coefficients.clone();
            Some(Box::new(move |x| {
                let d = wiener_drifts(&c, &density, t, x).expect("analytic density");
                match dir {
                    Direction::Forward => d.forward,
                    Direction::Backward => d.backward,
                    Direction::Symmetric => 0.5 * (d.forward + d.backward),
                }
            }))
        }
        _ => None,
    }
}

fn nelson_estimate(cfg: &ExperimentConfig, label: &str) -> Result<Partial> {
    let process = cfg.process_config().map_err(|e| anyhow!("process: {e}"))?;
    let plan = SigmaFieldPlan::parse(&req(&cfg.sigma_field, "sigma_field")?)?;
    let t = req(&cfg.t, "t")?;
    let dir = req(&cfg.direction, "direction")?;
    let ladder = HLadder::new(req(&cfg.ladder, "ladder")?, dir)?;
    let vc = cfg.verdict_config();
    let r = match &cfg.input {
        Some(path) => {
            let e: PathEnsemble<f64> =
                io::load(path).with_context(|| format!("loading ensemble {}", path.display()))?;
            let specs = ladder.steps().iter().map(|&h| plan.resolve(t, h)).collect::<Result<Vec<_>, _>>()?;
            estimate_on(&process, &e, plan, &specs, t, &ladder, &vc)?
        }
        None => estimate_derivative(&process, plan, t, &ladder, &params(cfg)?, &vc)?,
    };

    let mut rows = Rows { experiment: label, rows: Vec::new() };
    let sf = plan.to_string();
    let emit = |rows: &mut Rows, h: String, est: &ConditionalEstimate<f64>| {
        if est.bins.is_empty() {
            for (k, (c, se)) in est.coefficients.iter().zip(&est.coefficient_se).enumerate() {
                rows.push(format!("t={};h={h};sigma_field={sf};coefficient={k}", g(t)), *c, *se, "");
            }
        } else {
            for b in &est.bins {
                let tag = if b.excluded { ";excluded" } else { "" };
                rows.push(
                    format!("t={};h={h};sigma_field={sf};x={};count={}{tag}", g(t), g(b.center), b.count),
                    b.estimate,
                    b.se,
                    "",
                );
            }
        }
    };
    for (h, level) in ladder.steps().iter().zip(&r.levels) {
        emit(&mut rows, g(*h), level);
    }
    if let Some(l) = &r.limit {
        emit(&mut rows, "0".into(), l);
    }
    let verdict = verdict_name(r.verdict);
    let mut summary = BTreeMap::new();
    summary.insert("limit_variance".into(), r.limit_variance);
    summary.insert("cauchy_gap".into(), r.cauchy_gap);
    if let Some(l) = &r.limit {
        if l.coefficients.len() == 2 {
            summary.insert("intercept".into(), l.coefficients[0]);
            summary.insert("slope".into(), l.coefficients[1]);
            summary.insert("slope_se".into(), l.coefficient_se[1]);
        }
    }
    if let (Some(truth), true) = (present_truth(cfg, &process, t, dir), plan == SigmaFieldPlan::Present) {
        if let (Some(l), Some(m)) = (&r.limit, &r.value_model) {
            let (mut num, mut den, mut w) = (0.0, 0.0, 0.0);
            for (b, v) in l.bins.iter().zip(m).filter(|(b, _)| !b.excluded) {
                let f = truth(b.center);
                num += b.count as f64 * (v - f) * (v - f);
                den += b.count as f64 * f * f;
                w += b.count as f64;
            }
            summary.insert("rms_error".into(), (num / w).sqrt());
            if den > 0.0 {
                summary.insert("relative_l2".into(), (num / den).sqrt());
            }
        }
    }
    rows.push(
        format!("t={};h=0;sigma_field={sf};summary=slope", g(t)),
        summary.get("slope").copied().unwrap_or(f64::NAN),
        summary.get("slope_se").copied().unwrap_or(f64::NAN),
        &verdict,
    );
    let mut p = Partial::new(serde_json::to_value(&r)?, serde_json::to_value(&vc)?);
    p.verdict = Some(verdict);
    p.summary = summary;
    p.rows = rows.rows;
    Ok(p)
}

fn classify_kernel(cfg: &ExperimentConfig, label: &str) -> Result<Partial> {
    let horizon = req(&cfg.horizon, "horizon")?;
    let kernel = parse_kernel(&req(&cfg.kernel, "kernel")?, horizon).map_err(|e| anyhow!("kernel: {e}"))?;
    let t = req(&cfg.t, "t")?;
    let schedule = cfg.schedule();
    let r = volterra_criterion(&kernel, t, &schedule)?;
    let mut rows = Rows { experiment: label, rows: Vec::new() };
    for (m, (d, s)) in r.deltas.iter().skip(1).zip(&r.shells).enumerate() {
        rows.push(format!("t={};delta={};shell={}", g(t), g(*d), m + 1), *s, f64::NAN, "");
    }
    let verdict = kernel_verdict_name(r.verdict);
    let integral = r.cumulative.last().copied().unwrap_or(f64::NAN);
    rows.push(format!("t={};summary=integral", g(t)), integral, f64::NAN, &verdict);
    let mut p = Partial::new(serde_json::to_value(&r)?, serde_json::to_value(schedule)?);
    p.summary.insert("integral".into(), integral);
    p.summary.insert("last_shell_ratio".into(), r.shell_ratios.last().copied().unwrap_or(f64::NAN));
    p.verdict = Some(verdict);
    p.rows = rows.rows;
    Ok(p)
}

fn xi(cfg: &ExperimentConfig, label: &str) -> Result<Partial> {
    let horizon = req(&cfg.horizon, "horizon")?;
    let kernel = parse_kernel(&req(&cfg.kernel, "kernel")?, horizon).map_err(|e| anyhow!("kernel: {e}"))?;
    let schedule = cfg.schedule();
    let r = xi_statistic(&kernel, horizon, req(&cfg.lattice, "lattice")?, &schedule)?;
    let mut rows = Rows { experiment: label, rows: Vec::new() };
    for (t, v) in r.times.iter().zip(&r.verdicts) {
        let exists = if matches!(v, KernelVerdict::Convergent) { 1.0 } else { 0.0 };
        rows.push(format!("t={}", g(*t)), exists, f64::NAN, &kernel_verdict_name(*v));
    }
    rows.push("summary=xi".into(), r.value, r.mesh, "");
    let mut p = Partial::new(serde_json::to_value(&r)?, serde_json::to_value(schedule)?);
    p.summary.insert("value".into(), r.value);
    p.summary.insert("mesh".into(), r.mesh);
    p.rows = rows.rows;
    Ok(p)
}

fn weak_pairing(cfg: &ExperimentConfig, label: &str) -> Result<Partial> {
    let process = cfg.process_config().map_err(|e| anyhow!("process: {e}"))?;
    let horizon = req(&cfg.horizon, "horizon")?;
    let v = parse_functional(&req(&cfg.functional, "functional")?, horizon).map_err(|e| anyhow!("functional: {e}"))?;
    let t = req(&cfg.t, "t")?;
    let dir = req(&cfg.direction, "direction")?;
    let ladder = HLadder::new(req(&cfg.ladder, "ladder")?, dir)?;
    let pc = cfg.pairing_config();
    let r = weak_pairing_limit(&process, &v, t, &ladder, &params(cfg)?, &pc)?;
    let mut rows = Rows { experiment: label, rows: Vec::new() };
    for ((h, m), se) in r.ladder.iter().zip(&r.level_means).zip(&r.level_se) {
        rows.push(format!("t={};h={}", g(t), g(*h)), *m, *se, "");
    }
    let verdict = verdict_name(r.verdict);
    rows.push(format!("t={};h=0", g(t)), r.limit, r.limit_se, &verdict);
    let mut p = Partial::new(serde_json::to_value(&r)?, serde_json::to_value(&pc)?);
    p.summary.insert("limit".into(), r.limit);
    p.summary.insert("limit_se".into(), r.limit_se);
    if let Some(e) = &r.exact {
        rows.push(format!("t={};h=0;reference=exact", g(t)), e.limit, f64::NAN, "");
        p.summary.insert("exact".into(), e.limit);
    }
    if let Some(c) = r.closed_form {
        rows.push(format!("t={};reference=closed-form", g(t)), c, f64::NAN, "");
        p.summary.insert("closed_form".into(), c);
    }
    p.verdict = Some(verdict);
    p.rows = rows.rows;
    Ok(p)
}

fn terminal_moments(e: &PathEnsemble<f64>) -> (f64, f64) {
    let last = e.column(e.n_points() - 1);
    let n = last.len() as f64;
    let m = last.iter().sum::<f64>() / n;
    let v = last.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v)
}

fn simulate(cfg: &ExperimentConfig, label: &str) -> Result<Partial> {
    let process = cfg.process_config().map_err(|e| anyhow!("process: {e}"))?;
    let prm = params(cfg)?;
    let grid = TimeGrid::uniform(prm.horizon, req(&cfg.steps, "steps")?)?;
    let e = match (&process, cfg.method) {
        (ProcessConfig::Fbm { hurst }, Some(SimulationMethod::Cholesky)) => cholesky_sample(*hurst, &grid, prm.n_paths, prm.seed)?,
        (ProcessConfig::Fbm { hurst }, _) => circulant_sample(*hurst, &grid, prm.n_paths, prm.seed, Observation::default())?,
        (ProcessConfig::Volterra { kernel, .. }, _) => volterra_sample(kernel, &grid, prm.n_paths, prm.seed, Observation::default())?,
        _ => bail!("simulate supports fbm and volterra processes"),
    };
    let (m, v) = terminal_moments(&e);
    let mut rows = Rows { experiment: label, rows: Vec::new() };
    rows.push(format!("t={};summary=terminal", g(prm.horizon)), m, (v / e.n_paths() as f64).sqrt(), "");
    let mut p = Partial::new(
        json!({ "label": e.label(), "paths": e.n_paths(), "points": e.n_points(), "has_driver": e.has_driver() }),
        Value::Null,
    );
    p.summary.insert("mean_terminal".into(), m);
    p.summary.insert("var_terminal".into(), v);
    p.rows = rows.rows;
    p.data = Some(Data::Ensemble(e));
    Ok(p)
}

fn solve(c: &CoefficientSet<f64>, grid: &TimeGrid<f64>, b: &[f64], scheme: Scheme) -> Result<SolutionPath<f64>> {
    Ok(match scheme {
        Scheme::DossSussmann => doss_sussmann_solve(c, grid, b)?,
        Scheme::EulerYoung => euler_young_solve(c, grid, b)?,
        Scheme::MilsteinYoung => milstein_young_solve(c, grid, b)?,
        Scheme::ProportionalFlow => proportional_flow_solve(c, grid, b)?,
    })
}

fn solve_sde(cfg: &ExperimentConfig, label: &str) -> Result<Partial> {
    let c = cfg.coefficients().map_err(|e| anyhow!("process: {e}"))?;
    let hurst = HurstIndex::new(req(&cfg.hurst, "hurst")?)?;
    let prm = params(cfg)?;
    let grid = TimeGrid::uniform(prm.horizon, req(&cfg.steps, "steps")?)?;
    let scheme = req(&cfg.scheme, "scheme")?;
    let b = circulant_sample(hurst, &grid, prm.n_paths, prm.seed, Observation::default())?;
    let mut rows = Rows { experiment: label, rows: Vec::new() };
    let mut first = None;
    let (mut residual, mut terminal) = (0.0f64, 0.0);
    for j in 0..b.n_paths() {
        let sol = solve(&c, &grid, b.path(j), scheme).with_context(|| format!("path {j}"))?;
        let res = young_residual(&c, &sol);
        let x_t = *sol.x.last().expect("non-empty grid");
        rows.push(format!("path={j};t={}", g(prm.horizon)), x_t, f64::NAN, "");
        residual = residual.max(res.abs());
        terminal += x_t / b.n_paths() as f64;
        first.get_or_insert(sol);
    }
    let sol = first.ok_or_else(|| anyhow!("no paths"))?;
    let mut p = Partial::new(
        json!({ "coefficients": c.name, "scheme": scheme, "paths": b.n_paths(), "flow_evaluations": sol.flow_evaluations }),
        Value::Null,
    );
    p.summary.insert("residual".into(), residual);
    p.summary.insert("terminal".into(), terminal);
    p.rows = rows.rows;
    p.data = Some(Data::Grid(sol.x_fn()));
    Ok(p)
}

fn frac_op(cfg: &ExperimentConfig, label: &str) -> Result<Partial> {
    let input = req(&cfg.input, "input")?;
    let text = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
    let f = GridFunction::from_csv(&text)?;
    let op = req(&cfg.operator, "operator")?;
    let out = match op {
        FracOperator::RlIntegral | FracOperator::RlDerivative => {
            let alpha = FracOrder::new(req(&cfg.order, "order")?)?;
            let side = cfg.side.unwrap_or(Side::Left);
            if op == FracOperator::RlIntegral {
                rl_integral(&f, alpha, side)?
            } else {
                rl_derivative(&f, alpha, side)?
            }
        }
        FracOperator::Kh | FracOperator::KhInverse | FracOperator::Oh => {
            let h = HurstIndex::new(req(&cfg.hurst, "hurst")?)?;
            match op {
                FracOperator::Kh => op_kh(&f, h)?,
                FracOperator::KhInverse => op_kh_inverse(&f, h)?,
                _ => op_oh(&f, h)?,
            }
        }
    };
    let sup = out.samples().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let terminal = *out.samples().last().expect("non-empty");
    let mut rows = Rows { experiment: label, rows: Vec::new() };
    rows.push(format!("t={};summary=terminal", g(out.end())), terminal, f64::NAN, "");
    let mut p = Partial::new(json!({ "operator": op, "points": out.len() }), Value::Null);
    p.summary.insert("sup_norm".into(), sup);
    p.summary.insert("terminal".into(), terminal);
    p.rows = rows.rows;
    p.data = Some(Data::Grid(out));
    Ok(p)
}
