//! Experiment configs: parsing, exhaustive validation, defaults and hashing.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use fracnelson::frac::KernelSpec;
use fracnelson::nelson::{
    BinRule, CylindricalFunctional, Direction, HLadder, PairingConfig, ProcessConfig, RefinementSchedule, SigmaFieldPlan,
    VerdictConfig,
};
use fracnelson::young::{CoefficientSet, ScalarFn, Scheme};
use fracnelson::HurstIndex;

/// Every numeric default in one place.
pub mod defaults {
    pub const PATHS: usize = 100_000;
    pub const SEED: u64 = 0;
    pub const HORIZON: f64 = 1.0;
    /// Fine simulation grid of SDE, Volterra and Wiener processes.
    pub const STEPS: usize = 1000;
    pub const LATTICE: usize = 64;
    pub const X0: f64 = 0.0;
    pub const LADDER: [f64; 3] = [0.2, 0.1, 0.05];
    /// Conditioning that moves with `h` (past:k, future:k) needs enough
    /// levels for the growth test.
    pub const MOVING_LADDER: [f64; 4] = [0.04, 0.01, 0.0025, 0.000625];
    /// Fine grid used with [`MOVING_LADDER`]; every step is a node.
    pub const MOVING_STEPS: usize = 1600;
    pub const ORDER: f64 = 0.5;
    pub const SOLVE_PATHS: usize = 1;
    pub const SOLVE_STEPS: usize = 1024;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NelsonEstimate,
    ClassifyKernel,
    Xi,
    WeakPairing,
    Simulate,
    SolveSde,
    FracOp,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::NelsonEstimate => "nelson-estimate",
            Self::ClassifyKernel => "classify-kernel",
            Self::Xi => "xi",
            Self::WeakPairing => "weak-pairing",
            Self::Simulate => "simulate",
            Self::SolveSde => "solve-sde",
            Self::FracOp => "frac-op",
        }
    }

    /// Scalars a `--check` expectation may refer to.
    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            Self::NelsonEstimate => &["slope", "slope_se", "intercept", "limit_variance", "cauchy_gap", "relative_l2", "rms_error"],
            Self::ClassifyKernel => &["integral", "last_shell_ratio"],
            Self::Xi => &["value", "mesh"],
            Self::WeakPairing => &["limit", "limit_se", "exact", "closed_form"],
            Self::Simulate => &["mean_terminal", "var_terminal"],
            Self::SolveSde => &["residual", "terminal"],
            Self::FracOp => &["sup_norm", "terminal"],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FracOperator {
    RlIntegral,
    RlDerivative,
    Kh,
    KhInverse,
    Oh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulationMethod {
    Circulant,
    Cholesky,
}

/// Optional overrides of the verdict and refinement thresholds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub growth_threshold: Option<f64>,
    pub growth_steps: Option<usize>,
    pub cauchy_abs: Option<f64>,
    pub cauchy_se: Option<f64>,
    pub min_bin_count: Option<usize>,
    pub bandwidth_factor: Option<f64>,
    pub value_model_degree: Option<usize>,
    pub smoothing_bins: Option<f64>,
    pub exponents: Option<Vec<f64>>,
    pub control_variate: Option<bool>,
    pub delta0_fraction: Option<f64>,
    pub halvings: Option<usize>,
    pub fd_step: Option<f64>,
    pub divergence_ratio: Option<f64>,
    pub convergence_ratio: Option<f64>,
    pub window: Option<usize>,
}

/// What `--check` compares the result against.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub verdict: Option<String>,
    pub metric: Option<String>,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Ensemble (`.csv` or binary) or grid-function CSV, by experiment.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
}

/// A config after defaults are applied; serialises to exactly what ran.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    /// Replaces the preset drift: `zero`, `constant:c` or `proportional:r`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<SimulationMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functional: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator: Option<FracOperator>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<fracnelson::frac::Side>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceOverrides>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputPaths>,
}

/// Every problem found in a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaErrors(pub Vec<String>);

impl fmt::Display for SchemaErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "config has {} schema error(s):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for SchemaErrors {}

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str, errors: &mut Vec<String>) -> Option<T> {
    let v = obj.get(key)?;
    match serde_json::from_value::<T>(v.clone()) {
        Ok(x) => Some(x),
        Err(e) => {
            errors.push(format!("{key}: {e}"));
            None
        }
    }
}

const KEYS: [&str; 26] = [
    "experiment",
    "id",
    "process",
    "hurst",
    "x0",
    "drift",
    "scheme",
    "sigma_field",
    "direction",
    "t",
    "ladder",
    "paths",
    "seed",
    "horizon",
    "steps",
    "method",
    "kernel",
    "lattice",
    "functional",
    "operator",
    "order",
    "side",
    "input",
    "tolerances",
    "expect",
    "output",
];

impl ExperimentConfig {
    /// Parses JSON text, reporting every type error and unknown key at once.
    pub fn parse(text: &str) -> Result<Self, SchemaErrors> {
        let value: Value = serde_json::from_str(text).map_err(|e| SchemaErrors(vec![format!("not valid JSON: {e}")]))?;
        let Value::Object(obj) = value else {
            return Err(SchemaErrors(vec!["top level must be a JSON object".into()]));
        };
        let mut errors = Vec::new();
        for k in obj.keys() {
            if !KEYS.contains(&k.as_str()) {
                errors.push(format!("{k}: unknown key"));
            }
        }
        let e = &mut errors;
        let cfg = Self {
            experiment: field(&obj, "experiment", e),
            id: field(&obj, "id", e),
            process: field(&obj, "process", e),
            hurst: field(&obj, "hurst", e),
            x0: field(&obj, "x0", e),
            drift: field(&obj, "drift", e),
            scheme: field(&obj, "scheme", e),
            sigma_field: field(&obj, "sigma_field", e),
            direction: field(&obj, "direction", e),
            t: field(&obj, "t", e),
            ladder: field(&obj, "ladder", e),
            paths: field(&obj, "paths", e),
            seed: field(&obj, "seed", e),
            horizon: field(&obj, "horizon", e),
            steps: field(&obj, "steps", e),
            method: field(&obj, "method", e),
            kernel: field(&obj, "kernel", e),
            lattice: field(&obj, "lattice", e),
            functional: field(&obj, "functional", e),
            operator: field(&obj, "operator", e),
            order: field(&obj, "order", e),
            side: field(&obj, "side", e),
            input: field(&obj, "input", e),
            tolerances: field(&obj, "tolerances", e),
            expect: field(&obj, "expect", e),
            output: field(&obj, "output", e),
        };
        if !obj.contains_key("experiment") {
            errors.push("experiment: missing; one of nelson-estimate, classify-kernel, xi, weak-pairing, simulate, solve-sde, frac-op".into());
        }
        let resolved = cfg.resolve();
        match resolved {
            Ok(r) if errors.is_empty() => Ok(r),
            Ok(_) => Err(SchemaErrors(errors)),
            Err(SchemaErrors(more)) => {
                errors.extend(more);
                Err(SchemaErrors(errors))
            }
        }
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.expect("resolved configs name their experiment")
    }

    /// Canonical JSON of the resolved config.
    /// Output locations are excluded.
    pub fn canonical_json(&self) -> String {
        let experiment = Self { output: None, ..self.clone() };
        serde_json::to_string(&experiment).expect("configs serialise")
    }

    /// SHA-256 of [`Self::canonical_json`], hex encoded.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn label(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.kind().name().to_string())
    }

    /// Applies defaults and checks every semantic constraint.
    pub fn resolve(mut self) -> Result<Self, SchemaErrors> {
        let mut errors = Vec::new();
        let Some(kind) = self.experiment else {
            return Err(SchemaErrors(errors));
        };
        let needs = |v: bool, name: &str, errors: &mut Vec<String>| {
            if !v {
                errors.push(format!("{name}: required by experiment `{kind}`"));
            }
        };
        use ExperimentKind::*;
        match kind {
            NelsonEstimate | WeakPairing => {
                needs(self.process.is_some(), "process", &mut errors);
                needs(self.t.is_some(), "t", &mut errors);
                if kind == NelsonEstimate {
                    self.sigma_field.get_or_insert_with(|| "present".into());
                } else {
                    self.functional.get_or_insert_with(|| "terminal".into());
                }
                let past = self.sigma_field.as_deref().is_some_and(|s| s.starts_with("past"));
                let moving = past || self.sigma_field.as_deref().is_some_and(|s| s.starts_with("future"));
                self.direction.get_or_insert(if past { Direction::Forward } else { Direction::Symmetric });
                let ladder = if moving { &defaults::MOVING_LADDER[..] } else { &defaults::LADDER[..] };
                self.ladder.get_or_insert_with(|| ladder.to_vec());
                if moving && self.fine_grid() {
                    self.steps.get_or_insert(defaults::MOVING_STEPS);
                }
                self.paths.get_or_insert(defaults::PATHS);
                self.seed.get_or_insert(defaults::SEED);
                self.horizon.get_or_insert(defaults::HORIZON);
                self.fill_process_defaults();
            }
            ClassifyKernel => {
                needs(self.kernel.is_some(), "kernel", &mut errors);
                needs(self.t.is_some(), "t", &mut errors);
                self.horizon.get_or_insert(defaults::HORIZON);
            }
            Xi => {
                needs(self.kernel.is_some(), "kernel", &mut errors);
                self.horizon.get_or_insert(defaults::HORIZON);
                self.lattice.get_or_insert(defaults::LATTICE);
            }
            Simulate => {
                needs(self.process.is_some(), "process", &mut errors);
                self.paths.get_or_insert(defaults::PATHS);
                self.seed.get_or_insert(defaults::SEED);
                self.horizon.get_or_insert(defaults::HORIZON);
                self.steps.get_or_insert(defaults::SOLVE_STEPS);
                if self.process.as_deref().is_some_and(|p| p.starts_with("fbm")) {
                    self.method.get_or_insert(SimulationMethod::Circulant);
                }
                self.fill_process_defaults();
            }
            SolveSde => {
                needs(self.process.is_some(), "process", &mut errors);
                needs(self.hurst.is_some(), "hurst", &mut errors);
                self.paths.get_or_insert(defaults::SOLVE_PATHS);
                self.seed.get_or_insert(defaults::SEED);
                self.horizon.get_or_insert(defaults::HORIZON);
                self.steps.get_or_insert(defaults::SOLVE_STEPS);
                self.x0.get_or_insert(defaults::X0);
                self.scheme.get_or_insert(Scheme::DossSussmann);
            }
            FracOp => {
                needs(self.operator.is_some(), "operator", &mut errors);
                needs(self.input.is_some(), "input", &mut errors);
                if matches!(self.operator, Some(FracOperator::RlIntegral | FracOperator::RlDerivative)) {
                    self.order.get_or_insert(defaults::ORDER);
                    self.side.get_or_insert(fracnelson::frac::Side::Left);
                } else {
                    needs(self.hurst.is_some(), "hurst", &mut errors);
                }
            }
        }
        self.validate(&mut errors);
        if errors.is_empty() {
            Ok(self)
        } else {
            Err(SchemaErrors(errors))
        }
    }

    fn fill_process_defaults(&mut self) {
        let Some(p) = self.process.as_deref() else { return };
        if p.starts_with("sde:") || p.starts_with("wiener:") {
            self.x0.get_or_insert(defaults::X0);
        }
        if p.starts_with("sde:") {
            let proportional = p.starts_with("sde:proportional") || p.starts_with("sde:vanishing");
            self.scheme.get_or_insert(if proportional { Scheme::ProportionalFlow } else { Scheme::MilsteinYoung });
        }
        if self.fine_grid() {
            self.steps.get_or_insert(defaults::STEPS);
        }
    }

    /// Processes simulated on a fine time grid rather than exactly at the
    /// nodes the ladder touches.
    fn fine_grid(&self) -> bool {
        let Some(p) = self.process.as_deref() else { return false };
        let proportional = p.starts_with("sde:proportional") || p.starts_with("sde:vanishing");
        let flow = self.scheme.map_or(proportional, |s| s == Scheme::ProportionalFlow);
        p.starts_with("wiener:") || p.starts_with("volterra:") || (p.starts_with("sde:") && !flow)
    }

    fn validate(&self, errors: &mut Vec<String>) {
        let kind = self.kind();
        let horizon = self.horizon.unwrap_or(defaults::HORIZON);
        if !(horizon > 0.0 && horizon.is_finite()) {
            errors.push(format!("horizon: must be positive, got {horizon}"));
        }
        if let Some(t) = self.t {
            if !(t > 0.0 && t <= horizon) {
                errors.push(format!("t: must lie in (0, horizon={horizon}], got {t}"));
            }
        }
        if self.paths == Some(0) {
            errors.push("paths: must be at least 1".into());
        }
        if self.steps == Some(0) {
            errors.push("steps: must be at least 1".into());
        }
        if self.lattice == Some(0) {
            errors.push("lattice: must be at least 1".into());
        }
        if let Some(h) = self.hurst {
            if !(h > 0.0 && h < 1.0) {
                errors.push(format!("hurst: must lie in (0, 1), got {h}"));
            }
        }
        if let Some(ladder) = &self.ladder {
            if ladder.is_empty() {
                errors.push("ladder: must contain at least one step".into());
            } else if let Err(e) = HLadder::new(ladder.clone(), self.direction.unwrap_or(Direction::Forward)) {
                errors.push(format!("ladder: {e}"));
            } else if let (Some(t), Some(dir)) = (self.t, self.direction) {
                if let Err(e) = HLadder::new(ladder.clone(), dir).and_then(|l| l.check(t, horizon)) {
                    errors.push(format!("ladder: {e}"));
                }
            }
        }
        if let Some(s) = &self.sigma_field {
            if let Err(e) = SigmaFieldPlan::parse(s) {
                errors.push(format!("sigma_field: {e}"));
            }
        }
        if let Some(p) = &self.process {
            let checked = if kind == ExperimentKind::SolveSde {
                self.coefficients().map(|_| ())
            } else {
                self.process_config().map(|_| ())
            };
            if let Err(e) = checked {
                errors.push(format!("process: `{p}`: {e}"));
            }
        }
        if let Some(d) = &self.drift {
            let coefficient_process = kind == ExperimentKind::SolveSde
                || self.process.as_deref().is_some_and(|p| p.starts_with("sde:") || p.starts_with("wiener:"));
            if !coefficient_process {
                errors.push(format!("drift: `{d}` needs an sde or wiener process"));
            }
        }
        if let Some(k) = &self.kernel {
            if let Err(e) = parse_kernel(k, horizon) {
                errors.push(format!("kernel: `{k}`: {e}"));
            }
        }
        if let Some(f) = &self.functional {
            if let Err(e) = parse_functional(f, horizon) {
                errors.push(format!("functional: `{f}`: {e}"));
            }
        }
        if let Some(o) = self.order {
            if !(o > 0.0 && o <= 1.0) {
                errors.push(format!("order: must lie in (0, 1], got {o}"));
            }
        }
        if let Some(t) = &self.tolerances {
            if t.exponents.as_ref().is_some_and(|e| e.first() != Some(&0.0)) {
                errors.push("tolerances.exponents: the first power must be 0".into());
            }
            for (name, v) in [
                ("growth_threshold", t.growth_threshold),
                ("cauchy_se", t.cauchy_se),
                ("bandwidth_factor", t.bandwidth_factor),
                ("smoothing_bins", t.smoothing_bins),
                ("delta0_fraction", t.delta0_fraction),
                ("fd_step", t.fd_step),
            ] {
                if v.is_some_and(|v| !(v > 0.0)) {
                    errors.push(format!("tolerances.{name}: must be positive"));
                }
            }
            if t.cauchy_abs.is_some_and(|v| v < 0.0) {
                errors.push("tolerances.cauchy_abs: must be non-negative".into());
            }
        }
        if let Some(x) = &self.expect {
            if let Some(m) = &x.metric {
                if !kind.metrics().contains(&m.as_str()) {
                    errors.push(format!("expect.metric: `{m}` is not one of {:?}", kind.metrics()));
                }
                if x.target.is_none() || x.tolerance.is_none() {
                    errors.push("expect: a metric needs both target and tolerance".into());
                }
            }
        }
        if kind == ExperimentKind::Simulate {
            if let Some(p) = &self.process {
                if !(p.starts_with("fbm:") || p.starts_with("volterra:")) {
                    errors.push(format!("process: simulate supports fbm:H and volterra:KERNEL, got `{p}`"));
                }
            }
        }
    }

    /// The process described by `process`, `hurst`, `x0`, `scheme`, `steps`.
    pub fn process_config(&self) -> Result<ProcessConfig<f64>, String> {
        let p = self.process.as_deref().ok_or("missing")?;
        let horizon = self.horizon.unwrap_or(defaults::HORIZON);
        let steps = self.steps.unwrap_or(defaults::STEPS);
        let (head, rest) = p.split_once(':').ok_or("expected fbm:H, sde:PRESET, volterra:KERNEL or wiener:PRESET")?;
        match head {
            "fbm" => Ok(ProcessConfig::Fbm { hurst: parse_hurst(rest)? }),
            "sde" => {
                let h = self.hurst.ok_or("sde processes need `hurst`")?;
                Ok(ProcessConfig::Sde {
                    hurst: HurstIndex::new(h).map_err(|e| e.to_string())?,
                    coefficients: self.coefficients()?,
                    steps,
                    scheme: self.scheme.unwrap_or(Scheme::MilsteinYoung),
                })
            }
            "volterra" => Ok(ProcessConfig::Volterra {
                kernel: parse_kernel(rest, horizon)?,
                steps,
            }),
            "wiener" => Ok(ProcessConfig::Wiener {
                coefficients: self.coefficients()?,
                steps,
            }),
            _ if is_preset(p) => Err("bare coefficient presets need the sde: prefix".into()),
            _ => Err(format!("unknown process family `{head}`")),
        }
    }

    /// The preset named by `process`, with `drift` applied.
    pub fn coefficients(&self) -> Result<CoefficientSet<f64>, String> {
        let p = self.process.as_deref().ok_or("missing")?;
        let preset = p.split_once(':').filter(|(h, _)| *h == "sde" || *h == "wiener").map_or(p, |(_, r)| r);
        let c = CoefficientSet::preset(preset, self.x0.unwrap_or(defaults::X0)).map_err(|e| e.to_string())?;
        match self.drift.as_deref() {
            None => Ok(c),
            Some(d) => with_drift(c, d),
        }
    }

    pub fn verdict_config(&self) -> VerdictConfig<f64> {
        let mut c = VerdictConfig::default();
        if let Some(t) = &self.tolerances {
            c.growth_threshold = t.growth_threshold.unwrap_or(c.growth_threshold);
            c.growth_steps = t.growth_steps.unwrap_or(c.growth_steps);
            c.cauchy_abs = t.cauchy_abs.unwrap_or(c.cauchy_abs);
            c.cauchy_se = t.cauchy_se.unwrap_or(c.cauchy_se);
            c.bins = BinRule {
                bandwidth_factor: t.bandwidth_factor.unwrap_or(c.bins.bandwidth_factor),
                min_count: t.min_bin_count.unwrap_or(c.bins.min_count),
            };
            c.value_model_degree = t.value_model_degree.unwrap_or(c.value_model_degree);
            c.smoothing_bins = t.smoothing_bins.unwrap_or(c.smoothing_bins);
            if t.exponents.is_some() {
                c.exponents = t.exponents.clone();
            }
            c.control_variate = t.control_variate.unwrap_or(c.control_variate);
        }
        c
    }

    pub fn schedule(&self) -> RefinementSchedule {
        let mut s = RefinementSchedule::default();
        if let Some(t) = &self.tolerances {
            s.delta0_fraction = t.delta0_fraction.unwrap_or(s.delta0_fraction);
            s.halvings = t.halvings.unwrap_or(s.halvings);
            s.fd_step = t.fd_step.unwrap_or(s.fd_step);
            s.divergence_ratio = t.divergence_ratio.unwrap_or(s.divergence_ratio);
            s.convergence_ratio = t.convergence_ratio.unwrap_or(s.convergence_ratio);
            s.window = t.window.unwrap_or(s.window);
        }
        s
    }

    pub fn pairing_config(&self) -> PairingConfig<f64> {
        let mut c = PairingConfig::for_direction(self.direction.unwrap_or(Direction::Symmetric));
        if let Some(t) = &self.tolerances {
            if let Some(e) = &t.exponents {
                c.exponents = e.clone();
            }
            c.cauchy_abs = t.cauchy_abs.unwrap_or(c.cauchy_abs);
            c.cauchy_se = t.cauchy_se.unwrap_or(c.cauchy_se);
        }
        c
    }
}

fn with_drift(c: CoefficientSet<f64>, spec: &str) -> Result<CoefficientSet<f64>, String> {
    let (head, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let num = || arg.trim().parse::<f64>().map_err(|_| format!("drift `{spec}` needs a numeric argument"));
    let name = format!("{}+drift[{spec}]", c.name);
    let (b, b_prime, ratio): (ScalarFn<f64>, ScalarFn<f64>, Option<f64>) = match head {
        "zero" => (Arc::new(|_| 0.0), Arc::new(|_| 0.0), None),
        "constant" => {
            let k = num()?;
            (Arc::new(move |_| k), Arc::new(|_| 0.0), None)
        }
        "proportional" => {
            let r = num()?;
            let (s, sp) = (c.sigma.clone(), c.sigma_prime.clone());
            (Arc::new(move |x| r * s(x)), Arc::new(move |x| r * sp(x)), Some(r))
        }
        _ => return Err(format!("unknown drift `{spec}`; expected zero, constant:c or proportional:r")),
    };
    Ok(CoefficientSet::new(name, c.sigma, b, c.sigma_prime, b_prime, c.sigma_second, c.x0, ratio))
}

fn is_preset(p: &str) -> bool {
    CoefficientSet::<f64>::preset(p, 0.0).is_ok()
}

fn parse_hurst(s: &str) -> Result<HurstIndex<f64>, String> {
    let h: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    HurstIndex::new(h).map_err(|e| e.to_string())
}

/// `fbm:H` or `threshold:c`.
pub fn parse_kernel(s: &str, horizon: f64) -> Result<KernelSpec<f64>, String> {
    let (head, arg) = s.split_once(':').ok_or("expected fbm:H or threshold:c")?;
    match head {
        "fbm" => KernelSpec::fbm(parse_hurst(arg)?).map_err(|e| e.to_string()),
        "threshold" => {
            let c: f64 = arg.trim().parse().map_err(|_| format!("`{arg}` is not a number"))?;
            KernelSpec::threshold(c, horizon).map_err(|e| e.to_string())
        }
        _ => Err(format!("unknown kernel family `{head}`")),
    }
}

/// `terminal` (`V = B_T`), `one` (`V ≡ 1`) or `linear:c;u1=a1;u2=a2…`.
pub fn parse_functional(s: &str, horizon: f64) -> Result<CylindricalFunctional<f64>, String> {
    match s {
        "terminal" => CylindricalFunctional::linear(0.0, vec![horizon], vec![1.0]).map_err(|e| e.to_string()),
        "one" => Ok(CylindricalFunctional::constant(1.0)),
        _ => {
            let body = s.strip_prefix("linear:").ok_or("expected terminal, one or linear:c;u=a;…")?;
            let mut parts = body.split(';');
            let c: f64 = parts.next().unwrap_or("").trim().parse().map_err(|_| "linear: constant is not a number")?;
            let (mut times, mut coefs) = (Vec::new(), Vec::new());
            for term in parts {
                let (u, a) = term.split_once('=').ok_or_else(|| format!("term `{term}` is not u=a"))?;
                times.push(u.trim().parse::<f64>().map_err(|_| format!("`{u}` is not a time"))?);
                coefs.push(a.trim().parse::<f64>().map_err(|_| format!("`{a}` is not a coefficient"))?);
            }
            CylindricalFunctional::linear(c, times, coefs).map_err(|e| e.to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_and_hash_is_stable() {
        let a = ExperimentConfig::parse(r#"{"experiment":"nelson-estimate","process":"fbm:0.7","t":1.0,"horizon":1.2}"#).unwrap();
        assert_eq!(a.paths, Some(defaults::PATHS));
        assert_eq!(a.direction, Some(Direction::Symmetric));
        let b = ExperimentConfig::parse(&a.canonical_json()).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn moving_conditioning_gets_a_longer_ladder() {
        let past = ExperimentConfig::parse(r#"{"experiment":"nelson-estimate","process":"sde:sine","hurst":0.7,"sigma_field":"past:2","t":0.5}"#).unwrap();
        assert_eq!(past.ladder.as_deref(), Some(&defaults::MOVING_LADDER[..]));
        assert_eq!(past.steps, Some(defaults::MOVING_STEPS));
        assert_eq!(past.direction, Some(Direction::Forward));
        let exact = ExperimentConfig::parse(r#"{"experiment":"nelson-estimate","process":"fbm:0.7","sigma_field":"future:1","t":0.5}"#).unwrap();
        assert_eq!(exact.steps, None);
        assert_eq!(exact.ladder.map(|l| l.len()), Some(4));
    }

    #[test]
    fn every_error_is_listed() {
        let err = ExperimentConfig::parse(
            r#"{"experiment":"nelson-estimate","process":"fbm:1.5","ladder":[],"paths":"many","bogus":1,"sigma_field":"sideways"}"#,
        )
        .unwrap_err();
        let text = err.to_string();
        for needle in ["bogus", "paths", "ladder", "t: required", "process", "sigma_field"] {
            assert!(text.contains(needle), "missing `{needle}` in {text}");
        }
    }

    #[test]
    fn kernels_and_functionals() {
        assert!(parse_kernel("threshold:0.5", 1.0).is_ok());
        assert!(parse_kernel("threshold:2", 1.0).is_err());
        assert!(parse_kernel("fbm:0.75", 1.0).is_ok());
        let f = parse_functional("linear:1;0.5=2;1=-1", 1.0).unwrap();
        assert_eq!(f.times, vec![0.5, 1.0]);
        assert!(parse_functional("quadratic", 1.0).is_err());
    }
}
