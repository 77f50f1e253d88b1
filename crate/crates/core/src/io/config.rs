//! TOML run configuration.
//!
//! Parsing collects every problem it can find: unknown keys, keys that
//! do not belong to the selected `kind`, missing keys, and constructor
//! range violations, each tagged with its dotted key path. The schema is
//! documented in `docs/CONFIG.md`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constitutive::{ElasticLaw, ExponentialTensileLaw, FungBiaxialParams};
use crate::error::{Error, Result, ValidationIssue};
use crate::kernels::{
    EvaluationMethod, FungSpectrum, KelvinParams, MaxwellParams, PronySpectrum, ReducedRelaxation, VoigtParams,
};
use crate::network::{
    stability_check, Anchor, DampingMode, ForceSchedule, KernelEntry, NonlinearSpring, SpringMassSystem, Stability,
    SystemState,
};
use crate::protocols::{log_space, CreepSpec, CyclicSpec, ProtocolSpec, RelaxationSpec, Sampling, TensileSpec};
use crate::qlv::QlvModel;

use super::series::FULL_PRECISION;

/// Default number of Prony terms for continuous spectra.
pub const DEFAULT_PRONY_TERMS: usize = 64;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prony_terms: Option<usize>,
    pub elastic: ElasticSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ElasticSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub third_order: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
    /// `closed_form`, `quadrature` or `prony` (Fung only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method_terms: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProtocolSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stress: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stretch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_cycle: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transient_cycles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cycles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepSection {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default = "full_precision")]
    pub precision: usize,
    /// Relative amplitude of uniform multiplicative noise on stress
    /// columns.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn full_precision() -> usize {
    FULL_PRECISION
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { path: None, stride: 1, precision: FULL_PRECISION, noise: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkSection {
    pub masses: Vec<f64>,
    pub stiffness: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<Vec<Vec<f64>>>,
    /// `kernels_replace` or `both`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_displacement: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_velocity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub memory: Vec<KernelEntrySection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aero: Vec<KernelEntrySection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub springs: Vec<SpringSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forces: Vec<ForceSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelEntrySection {
    pub row: usize,
    pub col: usize,
    pub scale: f64,
    pub equilibrium: f64,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub frequencies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PronySection {
    pub equilibrium: f64,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub frequencies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpringSection {
    pub dof: usize,
    /// Other end of the spring; absent means ground.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<usize>,
    pub b: f64,
    pub c: f64,
    pub rest_length: f64,
    pub area: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<PronySection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceSection {
    pub dof: usize,
    /// `constant`, `step`, `sine` or `table`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub seed: Option<u64>,
}

/// A built network run.
#[derive(Debug, Clone)]
pub struct NetworkRun {
    pub system: SpringMassSystem,
    pub initial: SystemState,
    pub duration: f64,
    pub dt: f64,
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, "config", &Overrides::default())
}

/// Parses, applies `overrides`, fills defaults and validates. `origin`
/// names the source in syntax errors.
pub fn parse_config_with(text: &str, origin: &str, overrides: &Overrides) -> Result<RunConfig> {
    let mut unknown = Vec::new();
    let de = toml::Deserializer::parse(text).map_err(|e| syntax_error(text, origin, e))?;
    let mut config: RunConfig = serde_ignored::deserialize(de, |path| unknown.push(key_path(&path)))
        .map_err(|e| syntax_error(text, origin, e))?;
    let mut issues: Vec<ValidationIssue> = unknown.into_iter().map(|path| issue(&path, "unknown key")).collect();

    if let Some(p) = config.protocol.as_mut() {
        if let Some(dt) = overrides.dt {
            p.dt = Some(dt);
        }
        if let Some(d) = overrides.duration {
            p.duration = Some(d);
        }
    }
    if let Some(seed) = overrides.seed {
        config.output.seed = seed;
    }
    config.fill_defaults();
    config.validate(&mut issues);
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(Error::Validation(issues))
    }
}

/// Dotted path with array indices, e.g. `network.memory[1].scale`.
fn key_path(path: &serde_ignored::Path) -> String {
    use serde_ignored::Path;
    match path {
        Path::Root => String::new(),
        Path::Seq { parent, index } => format!("{}[{index}]", key_path(parent)),
        Path::Map { parent, key } => {
            let p = key_path(parent);
            if p.is_empty() {
                key.clone()
            } else {
                format!("{p}.{key}")
            }
        }
        Path::Some { parent } | Path::NewtypeStruct { parent } | Path::NewtypeVariant { parent } => key_path(parent),
    }
}

fn syntax_error(text: &str, origin: &str, e: toml::de::Error) -> Error {
    let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    Error::Parse { path: origin.to_string(), line, reason: e.message().to_string() }
}

fn issue(path: &str, message: impl Into<String>) -> ValidationIssue {
    ValidationIssue { path: path.to_string(), message: message.into() }
}

/// Reports keys not used by `kind` and missing required ones.
fn check_keys(
    issues: &mut Vec<ValidationIssue>,
    prefix: &str,
    kind: &str,
    present: &[(&str, bool)],
    required: &[&str],
    optional: &[&str],
) {
    for &(key, is_set) in present {
        if is_set && !required.contains(&key) && !optional.contains(&key) {
            issues.push(issue(&format!("{prefix}.{key}"), format!("not used by kind `{kind}`")));
        }
        if !is_set && required.contains(&key) {
            issues.push(issue(&format!("{prefix}.{key}"), format!("required for kind `{kind}`")));
        }
    }
}

/// Turns a constructor error into an issue under `prefix`.
fn constructor_issue(prefix: &str, e: Error) -> ValidationIssue {
    match e {
        Error::InvalidParameter { name, value, reason } => {
            let key = match name {
                "E_R" => "e_r",
                "K" => "equilibrium",
                "mass" => "masses",
                "amplitude" => "amplitudes",
                "frequency" => "frequencies",
                n if n.starts_with("alpha") => "alpha",
                n if n.starts_with("gamma") => "gamma",
                "a1" | "a2" | "a3" | "a4" => "a",
                n => n,
            };
            let detail = if key == name { String::new() } else { format!("{name} ") };
            issue(&format!("{prefix}.{key}"), format!("{detail}= {value}: {reason}"))
        }
        other => issue(prefix, other.to_string()),
    }
}

fn collect<T>(issues: &mut Vec<ValidationIssue>, prefix: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            issues.push(constructor_issue(prefix, e));
            None
        }
    }
}

fn fixed<const N: usize>(issues: &mut Vec<ValidationIssue>, path: &str, v: &Option<Vec<f64>>) -> Option<[f64; N]> {
    let v = v.as_ref()?;
    match <[f64; N]>::try_from(v.as_slice()) {
        Ok(a) => Some(a),
        Err(_) => {
            issues.push(issue(path, format!("expected {N} values, found {}", v.len())));
            None
        }
    }
}

fn matrix(issues: &mut Vec<ValidationIssue>, path: &str, rows: &[Vec<f64>], n: usize) -> Option<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        issues.push(issue(path, format!("expected a {n}x{n} matrix")));
        return None;
    }
    Some(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn prony(equilibrium: f64, amplitudes: &[f64], frequencies: &[f64]) -> Result<PronySpectrum> {
    if amplitudes.len() != frequencies.len() {
        return Err(Error::Domain(format!("{} amplitudes but {} frequencies", amplitudes.len(), frequencies.len())));
    }
    PronySpectrum::new(equilibrium, amplitudes.iter().copied().zip(frequencies.iter().copied()))
}

impl ElasticSection {
    fn fill_defaults(&mut self) {
        if self.kind == "fung" {
            self.alpha.get_or_insert_with(|| vec![0.0; 4]);
            self.gamma.get_or_insert_with(|| vec![0.0; 5]);
            self.quadratic.get_or_insert(true);
            self.third_order.get_or_insert(false);
        }
    }

    fn build(&self, issues: &mut Vec<ValidationIssue>) -> Option<ElasticLaw> {
        const P: &str = "model.elastic";
        let present = [
            ("modulus", self.modulus.is_some()),
            ("b", self.b.is_some()),
            ("c", self.c.is_some()),
            ("alpha", self.alpha.is_some()),
            ("a", self.a.is_some()),
            ("gamma", self.gamma.is_some()),
            ("quadratic", self.quadratic.is_some()),
            ("third_order", self.third_order.is_some()),
        ];
        let before = issues.len();
        match self.kind.as_str() {
            "linear" => {
                check_keys(issues, P, "linear", &present, &["modulus"], &[]);
                let k = self.modulus?;
                collect(issues, P, ElasticLaw::linear(k))
            }
            "exponential" => {
                check_keys(issues, P, "exponential", &present, &["b", "c"], &[]);
                let (b, c) = (self.b?, self.c?);
                collect(issues, P, ElasticLaw::exponential(b, c))
            }
            "fung" => {
                check_keys(issues, P, "fung", &present, &["c", "a"], &["alpha", "gamma", "quadratic", "third_order"]);
                let alpha = fixed::<4>(issues, "model.elastic.alpha", &self.alpha);
                let a = fixed::<4>(issues, "model.elastic.a", &self.a);
                let gamma = fixed::<5>(issues, "model.elastic.gamma", &self.gamma);
                let quadratic = self.quadratic.unwrap_or(true);
                let third = self.third_order.unwrap_or(false);
                if let (Some(g), false) = (gamma, third) {
                    if g.iter().any(|&x| x != 0.0) {
                        issues.push(issue("model.elastic.gamma", "set but third_order = false"));
                    }
                }
                if let (Some(al), false) = (alpha, quadratic) {
                    if al.iter().any(|&x| x != 0.0) {
                        issues.push(issue("model.elastic.alpha", "set but quadratic = false"));
                    }
                }
                if issues.len() > before {
                    return None;
                }
                let params = FungBiaxialParams::new(alpha?, a?, gamma?, self.c?, quadratic, third);
                collect(issues, P, params).map(ElasticLaw::Fung)
            }
            other => {
                issues.push(issue("model.elastic.kind", format!("unknown kind `{other}` (linear, exponential, fung)")));
                None
            }
        }
        .filter(|_| issues.len() == before)
    }
}

impl KernelSection {
    fn fill_defaults(&mut self) {
        if self.kind == "fung" {
            self.method.get_or_insert_with(|| "closed_form".into());
            if self.method.as_deref() == Some("prony") {
                self.method_terms.get_or_insert(DEFAULT_PRONY_TERMS);
            }
        }
    }

    fn build(&self, issues: &mut Vec<ValidationIssue>) -> Option<ReducedRelaxation> {
        const P: &str = "model.kernel";
        let present = [
            ("mu", self.mu.is_some()),
            ("eta", self.eta.is_some()),
            ("e_r", self.e_r.is_some()),
            ("tau_eps", self.tau_eps.is_some()),
            ("tau_sigma", self.tau_sigma.is_some()),
            ("c", self.c.is_some()),
            ("q1", self.q1.is_some()),
            ("q2", self.q2.is_some()),
            ("equilibrium", self.equilibrium.is_some()),
            ("amplitudes", self.amplitudes.is_some()),
            ("frequencies", self.frequencies.is_some()),
            ("method", self.method.is_some()),
            ("method_terms", self.method_terms.is_some()),
        ];
        let before = issues.len();
        let kind = self.kind.as_str();
        let built = match kind {
            "elastic" => {
                check_keys(issues, P, kind, &present, &[], &[]);
                Some(ReducedRelaxation::elastic())
            }
            "maxwell" => {
                check_keys(issues, P, kind, &present, &["mu", "eta"], &[]);
                let p = collect(issues, P, MaxwellParams::new(self.mu?, self.eta?))?;
                Some(ReducedRelaxation::maxwell(&p))
            }
            "voigt" => {
                check_keys(issues, P, kind, &present, &["mu", "eta"], &[]);
                let p = collect(issues, P, VoigtParams::new(self.mu?, self.eta?))?;
                Some(ReducedRelaxation::voigt(&p))
            }
            "kelvin" => {
                check_keys(issues, P, kind, &present, &["e_r", "tau_eps", "tau_sigma"], &[]);
                let p = collect(issues, P, KelvinParams::new(self.e_r?, self.tau_eps?, self.tau_sigma?))?;
                Some(ReducedRelaxation::kelvin(&p))
            }
            "prony" => {
                check_keys(issues, P, kind, &present, &["equilibrium", "amplitudes", "frequencies"], &[]);
                let s = prony(self.equilibrium?, self.amplitudes.as_ref()?, self.frequencies.as_ref()?);
                let s = collect(issues, P, s)?;
                collect(issues, P, ReducedRelaxation::prony(&s))
            }
            "fung" => {
                let optional: &[&str] =
                    if self.method.as_deref() == Some("prony") { &["method", "method_terms"] } else { &["method"] };
                check_keys(issues, P, kind, &present, &["c", "q1", "q2"], optional);
                let s = collect(issues, P, FungSpectrum::new(self.c?, self.q1?, self.q2?))?;
                let method = match self.method.as_deref().unwrap_or("closed_form") {
                    "closed_form" => EvaluationMethod::ClosedForm,
                    "quadrature" => EvaluationMethod::Quadrature,
                    "prony" => {
                        EvaluationMethod::PronyApproximation { terms: self.method_terms.unwrap_or(DEFAULT_PRONY_TERMS) }
                    }
                    other => {
                        issues.push(issue(
                            "model.kernel.method",
                            format!("unknown method `{other}` (closed_form, quadrature, prony)"),
                        ));
                        return None;
                    }
                };
                let g = ReducedRelaxation::fung(s).with_method(method);
                collect(issues, "model.kernel.method_terms", g)
            }
            other => {
                issues.push(issue(
                    "model.kernel.kind",
                    format!("unknown kind `{other}` (elastic, maxwell, voigt, kelvin, prony, fung)"),
                ));
                None
            }
        };
        built.filter(|_| issues.len() == before)
    }
}

impl KernelSection {
    /// Builds the reduced relaxation, reporting problems under
    /// `model.kernel`.
    pub fn relaxation(&self) -> Result<ReducedRelaxation> {
        let mut issues = Vec::new();
        let g = self.build(&mut issues);
        RunConfig::finish(g, issues)
    }
}

impl ModelSection {
    fn is_continuous(&self) -> bool {
        self.kernel.as_ref().is_some_and(|k| k.kind == "fung")
    }

    fn fill_defaults(&mut self) {
        self.elastic.fill_defaults();
        let kernel = self.kernel.get_or_insert_with(|| KernelSection { kind: "elastic".into(), ..Default::default() });
        kernel.fill_defaults();
        if self.is_continuous() {
            self.prony_terms.get_or_insert(DEFAULT_PRONY_TERMS);
        }
    }

    fn build(&self, issues: &mut Vec<ValidationIssue>) -> Option<QlvModel> {
        let before = issues.len();
        if self.prony_terms.is_some() && !self.is_continuous() {
            issues.push(issue("model.prony_terms", "only used by continuous (fung) kernels"));
        }
        let terms = self.prony_terms.unwrap_or(DEFAULT_PRONY_TERMS);
        if self.is_continuous() && terms < 2 {
            issues.push(issue("model.prony_terms", format!("= {terms}: must be >= 2")));
        }
        let elastic = self.elastic.build(issues);
        let relaxation = match &self.kernel {
            Some(k) => k.build(issues),
            None => Some(ReducedRelaxation::elastic()),
        };
        if issues.len() > before {
            return None;
        }
        collect(issues, "model", QlvModel::new(elastic?, relaxation?, terms))
    }
}

impl ProtocolSection {
    fn fill_defaults(&mut self) {
        if self.kind == "cyclic" {
            let d = CyclicSpec::new(self.amplitude.unwrap_or(0.0), 1.0);
            if let Some(a) = self.amplitude {
                self.mean.get_or_insert(1.0 + a);
            }
            self.steps_per_cycle.get_or_insert(d.steps_per_cycle);
            self.transient_cycles.get_or_insert(d.transient_cycles);
            self.max_cycles.get_or_insert(d.max_cycles);
            self.tolerance.get_or_insert(d.tolerance);
        }
    }

    fn present(&self) -> [(&'static str, bool); 13] {
        [
            ("duration", self.duration.is_some()),
            ("dt", self.dt.is_some()),
            ("rate", self.rate.is_some()),
            ("stress", self.stress.is_some()),
            ("stretch", self.stretch.is_some()),
            ("amplitude", self.amplitude.is_some()),
            ("frequency", self.frequency.is_some()),
            ("mean", self.mean.is_some()),
            ("steps_per_cycle", self.steps_per_cycle.is_some()),
            ("transient_cycles", self.transient_cycles.is_some()),
            ("max_cycles", self.max_cycles.is_some()),
            ("tolerance", self.tolerance.is_some()),
            ("sweep", self.sweep.is_some()),
        ]
    }

    fn sampling(&self, issues: &mut Vec<ValidationIssue>, stride: usize) -> Option<Sampling> {
        let s = Sampling::new(self.duration?, self.dt?, stride);
        collect(issues, "protocol", s)
    }

    /// Checks the keys for `kind`; builds the drive when it is a
    /// single-run protocol.
    fn build(&self, issues: &mut Vec<ValidationIssue>, stride: usize) -> Option<ProtocolSpec> {
        const P: &str = "protocol";
        let present = self.present();
        let before = issues.len();
        let kind = self.kind.as_str();
        let sampled = ["duration", "dt"];
        let positive = [("rate", self.rate), ("stretch", self.stretch)];
        for (key, value) in positive.into_iter().filter_map(|(k, v)| Some((k, v?))) {
            if !(value.is_finite() && value > 0.0) {
                issues.push(issue(&format!("{P}.{key}"), format!("= {value}: must be finite and > 0")));
            }
        }
        if let Some(stress) = self.stress.filter(|s| !s.is_finite()) {
            issues.push(issue("protocol.stress", format!("= {stress}: must be finite")));
        }
        let spec = match kind {
            "tensile" => {
                check_keys(issues, P, kind, &present, &["duration", "dt", "rate"], &[]);
                let sampling = self.sampling(issues, stride)?;
                Some(ProtocolSpec::Tensile(TensileSpec { rate: self.rate?, sampling }))
            }
            "creep" => {
                check_keys(issues, P, kind, &present, &["duration", "dt", "stress"], &[]);
                let sampling = self.sampling(issues, stride)?;
                Some(ProtocolSpec::Creep(CreepSpec { stress: self.stress?, sampling }))
            }
            "relaxation" => {
                check_keys(issues, P, kind, &present, &["duration", "dt", "stretch"], &[]);
                let sampling = self.sampling(issues, stride)?;
                Some(ProtocolSpec::Relaxation(RelaxationSpec { stretch: self.stretch?, sampling }))
            }
            "cyclic" => {
                check_keys(
                    issues,
                    P,
                    kind,
                    &present,
                    &["amplitude"],
                    &["frequency", "mean", "steps_per_cycle", "transient_cycles", "max_cycles", "tolerance", "sweep"],
                );
                if self.frequency.is_none() && self.sweep.is_none() {
                    issues.push(issue("protocol.frequency", "cyclic tests need `frequency` or a `sweep` table"));
                }
                if let Some(sw) = &self.sweep {
                    if let Err(e) = log_space(sw.from, sw.to, sw.points) {
                        issues.push(issue("protocol.sweep", e.to_string()));
                    }
                }
                let spec = self.cyclic_spec(self.frequency.unwrap_or(1.0), stride)?;
                if let Err(e) = spec.validate() {
                    issues.push(constructor_issue(P, e));
                    return None;
                }
                Some(ProtocolSpec::Cyclic(spec))
            }
            "simulate" => {
                check_keys(issues, P, kind, &present, &sampled, &[]);
                if let (Some(d), Some(dt)) = (self.duration, self.dt) {
                    collect(issues, P, Sampling::new(d, dt, stride));
                }
                None
            }
            other => {
                issues.push(issue(
                    "protocol.kind",
                    format!("unknown kind `{other}` (tensile, creep, relaxation, cyclic, simulate)"),
                ));
                None
            }
        };
        spec.filter(|_| issues.len() == before)
    }

    fn cyclic_spec(&self, frequency: f64, stride: usize) -> Option<CyclicSpec> {
        let amplitude = self.amplitude?;
        let d = CyclicSpec::new(amplitude, frequency);
        Some(CyclicSpec {
            mean: self.mean.unwrap_or(d.mean),
            steps_per_cycle: self.steps_per_cycle.unwrap_or(d.steps_per_cycle),
            transient_cycles: self.transient_cycles.unwrap_or(d.transient_cycles),
            max_cycles: self.max_cycles.unwrap_or(d.max_cycles),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            stride,
            ..d
        })
    }
}

impl NetworkSection {
    fn fill_defaults(&mut self) {
        let n = self.masses.len();
        self.initial_displacement.get_or_insert_with(|| vec![0.0; n]);
        self.initial_velocity.get_or_insert_with(|| vec![0.0; n]);
        let has_kernels = !self.memory.is_empty();
        if has_kernels && self.damping.is_some() {
            self.damping_mode.get_or_insert_with(|| "kernels_replace".into());
        }
    }

    fn build(&self, issues: &mut Vec<ValidationIssue>) -> Option<(SpringMassSystem, SystemState)> {
        let before = issues.len();
        let n = self.masses.len();
        let k = matrix(issues, "network.stiffness", &self.stiffness, n)?;
        let asymmetry = (&k - k.transpose()).amax();
        if asymmetry > 1e-12 * k.amax() {
            issues.push(issue("network.stiffness", format!("must be symmetric (max |K − Kᵀ| = {asymmetry:e})")));
            return None;
        }
        let mut system = collect(issues, "network", SpringMassSystem::new(self.masses.clone(), k))?;
        if let Ok(Stability::Unstable { minor, value }) = stability_check(system.stiffness()) {
            issues
                .push(issue("network.stiffness", format!("not positive definite: leading minor {minor} = {value:e}")));
        }
        if let Some(rows) = &self.damping {
            if let Some(beta) = matrix(issues, "network.damping", rows, n) {
                system = collect(issues, "network.damping", system.clone().with_damping(beta)).unwrap_or(system);
            }
        }
        match self.damping_mode.as_deref() {
            None => {}
            Some(_) if self.damping.is_none() || self.memory.is_empty() => {
                issues.push(issue("network.damping_mode", "only used when both damping and memory kernels are set"));
            }
            Some("kernels_replace") => system = system.with_damping_mode(DampingMode::KernelsReplace),
            Some("both") => system = system.with_damping_mode(DampingMode::Both),
            Some(other) => {
                issues.push(issue("network.damping_mode", format!("unknown mode `{other}` (kernels_replace, both)")))
            }
        }
        let entry = |issues: &mut Vec<ValidationIssue>, path: &str, e: &KernelEntrySection| {
            if e.row >= n || e.col >= n {
                issues.push(issue(path, format!("entry ({}, {}) outside a {n}-dof system", e.row, e.col)));
                return None;
            }
            let s = collect(issues, path, prony(e.equilibrium, &e.amplitudes, &e.frequencies))?;
            collect(issues, path, KernelEntry::new(e.row, e.col, e.scale, s))
        };
        for (i, e) in self.memory.iter().enumerate() {
            let path = format!("network.memory[{i}]");
            if let Some(entry) = entry(issues, &path, e) {
                system = collect(issues, &path, system.clone().add_memory(entry)).unwrap_or(system);
            }
        }
        for (i, e) in self.aero.iter().enumerate() {
            let path = format!("network.aero[{i}]");
            if let Some(entry) = entry(issues, &path, e) {
                system = collect(issues, &path, system.clone().add_aero(entry)).unwrap_or(system);
            }
        }
        for (i, s) in self.springs.iter().enumerate() {
            let path = format!("network.springs[{i}]");
            if s.dof >= n || s.anchor.is_some_and(|a| a >= n || a == s.dof) {
                issues.push(issue(&path, format!("dof/anchor must be distinct indices below {n}")));
                continue;
            }
            let Some(law) = collect(issues, &path, ExponentialTensileLaw::new(s.b, s.c)) else { continue };
            let kernel = match &s.kernel {
                Some(k) => {
                    let kpath = format!("{path}.kernel");
                    match collect(issues, &kpath, prony(k.equilibrium, &k.amplitudes, &k.frequencies)) {
                        Some(k) => Some(k),
                        None => continue,
                    }
                }
                None => None,
            };
            let anchor = s.anchor.map_or(Anchor::Ground, Anchor::Dof);
            let spring = NonlinearSpring::new(s.dof, anchor, law, s.rest_length, s.area, kernel.as_ref());
            if let Some(spring) = collect(issues, &path, spring) {
                system = collect(issues, &path, system.clone().add_spring(spring)).unwrap_or(system);
            }
        }
        for (i, f) in self.forces.iter().enumerate() {
            let path = format!("network.forces[{i}]");
            if f.dof >= n {
                issues.push(issue(&format!("{path}.dof"), format!("= {}: must be below {n}", f.dof)));
                continue;
            }
            if let Some(schedule) = f.build(issues, &path) {
                system = collect(issues, &path, system.clone().add_force(f.dof, schedule)).unwrap_or(system);
            }
        }
        let q0 = self.initial_displacement.clone().unwrap_or_else(|| vec![0.0; n]);
        let v0 = self.initial_velocity.clone().unwrap_or_else(|| vec![0.0; n]);
        for (key, v) in [("initial_displacement", &q0), ("initial_velocity", &v0)] {
            if v.len() != n {
                issues.push(issue(&format!("network.{key}"), format!("expected {n} values, found {}", v.len())));
            }
        }
        if issues.len() > before {
            return None;
        }
        let state = SystemState::new(&system, DVector::from_vec(q0), DVector::from_vec(v0));
        let state = collect(issues, "network.initial_displacement", state)?;
        Some((system, state))
    }
}

impl ForceSection {
    fn build(&self, issues: &mut Vec<ValidationIssue>, path: &str) -> Option<ForceSchedule> {
        let present = [
            ("value", self.value.is_some()),
            ("time", self.time.is_some()),
            ("amplitude", self.amplitude.is_some()),
            ("frequency", self.frequency.is_some()),
            ("phase", self.phase.is_some()),
            ("table", self.table.is_some()),
        ];
        let before = issues.len();
        let kind = self.kind.as_str();
        let schedule = match kind {
            "constant" => {
                check_keys(issues, path, kind, &present, &["value"], &[]);
                Some(ForceSchedule::Constant(self.value?))
            }
            "step" => {
                check_keys(issues, path, kind, &present, &["value", "time"], &[]);
                Some(ForceSchedule::Step { time: self.time?, value: self.value? })
            }
            "sine" => {
                check_keys(issues, path, kind, &present, &["amplitude", "frequency"], &["phase"]);
                Some(ForceSchedule::Sine {
                    amplitude: self.amplitude?,
                    frequency: self.frequency?,
                    phase: self.phase.unwrap_or(0.0),
                })
            }
            "table" => {
                check_keys(issues, path, kind, &present, &["table"], &[]);
                let t = self.table.as_ref()?;
                if t.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    issues.push(issue(&format!("{path}.table"), "times must be strictly increasing"));
                }
                Some(ForceSchedule::Table(t.iter().map(|p| (p[0], p[1])).collect()))
            }
            other => {
                issues.push(issue(
                    &format!("{path}.kind"),
                    format!("unknown kind `{other}` (constant, step, sine, table)"),
                ));
                None
            }
        };
        schedule.filter(|_| issues.len() == before)
    }
}

impl RunConfig {
    fn fill_defaults(&mut self) {
        if let Some(m) = self.model.as_mut() {
            m.fill_defaults();
        }
        if let Some(n) = self.network.as_mut() {
            n.fill_defaults();
        }
        if let Some(p) = self.protocol.as_mut() {
            p.fill_defaults();
        }
    }

    fn validate(&self, issues: &mut Vec<ValidationIssue>) {
        match (&self.model, &self.network) {
            (Some(_), Some(_)) => {
                issues.push(issue("network", "`model` and `network` are mutually exclusive; give exactly one"))
            }
            (None, None) => issues.push(issue("model", "a `model` or a `network` section is required")),
            _ => {}
        }
        let Some(protocol) = &self.protocol else {
            issues.push(issue("protocol", "missing section"));
            return;
        };
        let o = &self.output;
        if o.stride == 0 {
            issues.push(issue("output.stride", "= 0: must be >= 1"));
        }
        if o.precision == 0 || o.precision > FULL_PRECISION {
            issues.push(issue("output.precision", format!("= {}: must be in 1..={FULL_PRECISION}", o.precision)));
        }
        if !(o.noise >= 0.0 && o.noise < 1.0) {
            issues.push(issue("output.noise", format!("= {}: must be in [0, 1)", o.noise)));
        }
        protocol.build(issues, o.stride.max(1));
        let simulate = protocol.kind == "simulate";
        if let Some(m) = &self.model {
            if simulate {
                issues.push(issue("protocol.kind", "`simulate` needs a `network` section"));
            }
            m.build(issues);
        }
        if let Some(n) = &self.network {
            if !simulate {
                issues.push(issue("protocol.kind", format!("`{}` needs a `model` section", protocol.kind)));
            }
            if o.noise != 0.0 {
                issues.push(issue("output.noise", "not used by network simulations"));
            }
            if let Some((system, state)) = n.build(issues) {
                if let Some(dt) = protocol.dt {
                    if let Ok(limit) = system.stability_limit(&state.q) {
                        if dt >= limit {
                            issues.push(issue(
                                "protocol.dt",
                                format!("= {dt}: explicit integration needs dt < {limit:e}"),
                            ));
                        }
                    }
                }
            }
        }
    }

    /// Effective configuration (defaults filled) as TOML. Re-parsing the
    /// output yields the same configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    fn protocol_section(&self) -> Result<&ProtocolSection> {
        self.protocol.as_ref().ok_or_else(|| Error::Validation(vec![issue("protocol", "missing section")]))
    }

    fn finish<T>(value: Option<T>, issues: Vec<ValidationIssue>) -> Result<T> {
        match value {
            Some(v) if issues.is_empty() => Ok(v),
            _ if issues.is_empty() => Err(Error::Configuration("configuration could not be built".into())),
            _ => Err(Error::Validation(issues)),
        }
    }

    pub fn protocol_kind(&self) -> Result<&str> {
        Ok(self.protocol_section()?.kind.as_str())
    }

    pub fn qlv_model(&self) -> Result<QlvModel> {
        let model = self.model.as_ref().ok_or_else(|| Error::Validation(vec![issue("model", "missing section")]))?;
        let mut issues = Vec::new();
        let m = model.build(&mut issues);
        Self::finish(m, issues)
    }

    /// The single-run drive (tensile, creep, relaxation or cyclic).
    pub fn protocol_spec(&self) -> Result<ProtocolSpec> {
        let p = self.protocol_section()?;
        let mut issues = Vec::new();
        if p.kind == "cyclic" && p.frequency.is_none() {
            issues.push(issue("protocol.frequency", "required for a single cyclic run"));
        }
        let spec = p.build(&mut issues, self.output.stride);
        Self::finish(spec, issues)
    }

    /// Cyclic drive template and the sweep frequencies.
    pub fn sweep(&self) -> Result<(CyclicSpec, Vec<f64>)> {
        let p = self.protocol_section()?;
        let mut issues = Vec::new();
        if p.kind != "cyclic" {
            issues.push(issue("protocol.kind", format!("sweeps need kind `cyclic`, found `{}`", p.kind)));
        }
        let Some(sw) = &p.sweep else {
            issues.push(issue("protocol.sweep", "missing table (from, to, points)"));
            return Err(Error::Validation(issues));
        };
        let frequencies = collect(&mut issues, "protocol.sweep", log_space(sw.from, sw.to, sw.points));
        let spec = p.cyclic_spec(sw.from, self.output.stride);
        Self::finish(spec.zip(frequencies), issues)
    }

    pub fn network_run(&self) -> Result<NetworkRun> {
        let n = self.network.as_ref().ok_or_else(|| Error::Validation(vec![issue("network", "missing section")]))?;
        let p = self.protocol_section()?;
        let mut issues = Vec::new();
        let built = n.build(&mut issues);
        let (duration, dt) = match (p.duration, p.dt) {
            (Some(d), Some(dt)) => (d, dt),
            _ => {
                issues.push(issue("protocol", "`duration` and `dt` are required for simulate"));
                (0.0, 0.0)
            }
        };
        let run = built.map(|(system, initial)| NetworkRun { system, initial, duration, dt });
        Self::finish(run, issues)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model.elastic]
kind = "exponential"
b = 1
c = 1

[protocol]
kind = "relaxation"
stretch = 1.1
duration = 1
dt = 0.01
"#;

    fn issues(text: &str) -> Vec<ValidationIssue> {
        match parse_config(text) {
            Err(Error::Validation(v)) => v,
            other => panic!("expected validation errors, got {other:?}"),
        }
    }

    fn paths(text: &str) -> Vec<String> {
        issues(text).into_iter().map(|i| i.path).collect()
    }

    #[test]
    fn minimal_config_echo_is_idempotent() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.output.precision, 17);
        assert_eq!(cfg.model.as_ref().unwrap().kernel.as_ref().unwrap().kind, "elastic");
        let echo = cfg.to_toml();
        let again = parse_config(&echo).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml(), echo);
        assert!(matches!(cfg.protocol_spec().unwrap(), ProtocolSpec::Relaxation(_)));
    }

    #[test]
    fn q1_not_below_q2_is_reported_at_its_key() {
        let text = format!("{MINIMAL}\n[model.kernel]\nkind = \"fung\"\nc = 1\nq1 = 10\nq2 = 1\n");
        assert_eq!(paths(&text), vec!["model.kernel.q1"]);
    }

    #[test]
    fn model_and_network_are_exclusive() {
        let text = format!("{MINIMAL}\n[network]\nmasses = [1.0]\nstiffness = [[1.0]]\n");
        assert!(paths(&text).contains(&"network".to_string()));
    }

    #[test]
    fn all_unknown_keys_are_reported() {
        let text = MINIMAL.replace("b = 1", "b = 1\nbee = 2").replace("dt = 0.01", "dt = 0.01\nwhat = 1");
        let p = paths(&text);
        assert!(p.contains(&"model.elastic.bee".to_string()), "{p:?}");
        assert!(p.contains(&"protocol.what".to_string()), "{p:?}");
    }

    #[test]
    fn several_range_errors_at_once() {
        let text = MINIMAL.replace("b = 1", "b = -1").replace("dt = 0.01", "dt = 0");
        let p = paths(&text);
        assert!(p.contains(&"model.elastic.b".to_string()), "{p:?}");
        assert!(p.contains(&"protocol.dt".to_string()), "{p:?}");
    }

    #[test]
    fn keys_foreign_to_the_kind_are_errors() {
        let text = MINIMAL.replace("stretch = 1.1", "stretch = 1.1\nrate = 2");
        assert_eq!(paths(&text), vec!["protocol.rate"]);
    }

    #[test]
    fn overrides_apply_before_validation() {
        let o = Overrides { dt: Some(0.5), duration: Some(2.0), seed: Some(7) };
        let cfg = parse_config_with(MINIMAL, "m", &o).unwrap();
        let p = cfg.protocol.as_ref().unwrap();
        assert_eq!((p.dt, p.duration, cfg.output.seed), (Some(0.5), Some(2.0), 7));
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        match parse_config("[model]\nprony_terms = \"x\"\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn network_config_builds() {
        let text = r#"
[network]
masses = [1.0, 1.0]
stiffness = [[2.0, -1.0], [-1.0, 2.0]]
initial_displacement = [0.1, 0.0]

[[network.memory]]
row = 0
col = 0
scale = 1.0
equilibrium = 2.0
amplitudes = [0.5]
frequencies = [3.0]

[protocol]
kind = "simulate"
duration = 1.0
dt = 0.01
"#;
        let cfg = parse_config(text).unwrap();
        let run = cfg.network_run().unwrap();
        assert_eq!(run.system.dofs(), 2);
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unstable_network_dt_is_rejected() {
        let text = r#"
[network]
masses = [1.0]
stiffness = [[100.0]]

[protocol]
kind = "simulate"
duration = 1.0
dt = 0.5
"#;
        assert_eq!(paths(text), vec!["protocol.dt"]);
    }
}
