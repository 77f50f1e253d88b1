//! Virtual mechanical tests on QLV specimens and the metrics extracted
//! from them.
//!
//! All tests sample a fixed grid `tₖ = k·dt`, `k = 0..=floor(duration/dt)`,
//! and emit every `stride`-th sample. Metrics are computed on the full
//! grid.

mod fit;
mod nnls;

pub use fit::{
    fit_exponential_law, fit_relaxation_spectrum, fit_relaxation_spectrum_with_frequencies, ExponentialFit,
    RelaxationFit,
};
pub use nnls::nnls;

use rayon::prelude::*;

use crate::constitutive::StrainMeasure;
use crate::error::{Error, Result};
use crate::qlv::{hysteresis_ratio, qlv_stress_fast, QlvIntegrator, QlvModel, StrainHistory};

/// Strain offset of the yield construction.
pub const YIELD_OFFSET: f64 = 0.002;

/// Width of the initial strain window used for Young's modulus.
pub const MODULUS_WINDOW: f64 = 0.01;

/// Sampling shared by the transient tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub duration: f64,
    pub dt: f64,
    /// Emit every `stride`-th sample.
    pub stride: usize,
}

impl Sampling {
    pub fn new(duration: f64, dt: f64, stride: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", dt, "must be finite and > 0"));
        }
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::invalid("duration", duration, "must be finite and >= 0"));
        }
        if stride == 0 {
            return Err(Error::invalid("stride", 0.0, "must be >= 1"));
        }
        Ok(Self { duration, dt, stride })
    }

    /// Number of steps after the initial sample.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }

    /// Number of emitted rows.
    pub fn rows(&self) -> usize {
        self.steps() / self.stride + 1
    }

    fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|k| k as f64 * self.dt).collect()
    }
}

/// Constant-rate extension `λ(t) = 1 + rate·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensileSpec {
    pub rate: f64,
    pub sampling: Sampling,
}

/// Constant nominal stress applied at `t = 0` and held.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreepSpec {
    pub stress: f64,
    pub sampling: Sampling,
}

/// Stretch `λ₀` applied at `t = 0` and held.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationSpec {
    pub stretch: f64,
    pub sampling: Sampling,
}

/// Sinusoidal stretch `λ(t) = mean − amplitude·cos(frequency·t)`, with
/// `frequency` in radians per unit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CyclicSpec {
    pub amplitude: f64,
    pub frequency: f64,
    pub mean: f64,
    pub steps_per_cycle: usize,
    /// Cycles always discarded before steady state can be declared.
    pub transient_cycles: usize,
    pub max_cycles: usize,
    /// Relative cycle-to-cycle change of `H` that counts as steady.
    pub tolerance: f64,
    /// Emit every `stride`-th sample of the final cycle.
    pub stride: usize,
}

impl CyclicSpec {
    /// Starts from the reference configuration (`mean = 1 + amplitude`).
    pub fn new(amplitude: f64, frequency: f64) -> Self {
        Self {
            amplitude,
            frequency,
            mean: 1.0 + amplitude,
            steps_per_cycle: 256,
            transient_cycles: 3,
            max_cycles: 200,
            tolerance: 1e-3,
            stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid("amplitude", self.amplitude, "must be finite and > 0"));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::invalid("frequency", self.frequency, "must be finite and > 0"));
        }
        if !(self.mean - self.amplitude > 0.0) || !self.mean.is_finite() {
            return Err(Error::invalid("mean", self.mean, "stretch must stay > 0 (mean − amplitude > 0)"));
        }
        if self.steps_per_cycle < 8 || !self.steps_per_cycle.is_multiple_of(2) {
            return Err(Error::invalid("steps_per_cycle", self.steps_per_cycle as f64, "must be even and >= 8"));
        }
        if self.max_cycles <= self.transient_cycles {
            return Err(Error::invalid("max_cycles", self.max_cycles as f64, "must exceed the transient cycle count"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance", self.tolerance, "must be > 0"));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride", 0.0, "must be >= 1"));
        }
        Ok(())
    }
}

/// Which protocol to run, with its drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolSpec {
    Tensile(TensileSpec),
    Creep(CreepSpec),
    Relaxation(RelaxationSpec),
    Cyclic(CyclicSpec),
}

/// Sampled response of a test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSeries {
    pub time: Vec<f64>,
    pub stretch: Vec<f64>,
    /// `λ − 1` or Green strain, per `measure`.
    pub strain: Vec<f64>,
    pub stress: Vec<f64>,
    pub measure: StrainMeasure,
}

impl TestSeries {
    fn with_capacity(n: usize, measure: StrainMeasure) -> Self {
        Self {
            time: Vec::with_capacity(n),
            stretch: Vec::with_capacity(n),
            strain: Vec::with_capacity(n),
            stress: Vec::with_capacity(n),
            measure,
        }
    }

    fn push(&mut self, t: f64, lambda: f64, stress: f64) {
        self.time.push(t);
        self.stretch.push(lambda);
        self.strain.push(self.measure.axis_strain(lambda));
        self.stress.push(stress);
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    fn strided(&self, stride: usize) -> Self {
        let pick = |v: &Vec<f64>| v.iter().step_by(stride).copied().collect();
        Self {
            time: pick(&self.time),
            stretch: pick(&self.stretch),
            strain: pick(&self.strain),
            stress: pick(&self.stress),
            measure: self.measure,
        }
    }
}

/// Metrics extracted from a test; absent values were not defined by the
/// record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestReport {
    pub youngs_modulus: Option<f64>,
    pub yield_stress: Option<f64>,
    pub yield_strain: Option<f64>,
    pub uts: Option<f64>,
    pub fracture_energy: Option<f64>,
    /// `(time, d strain/dt)` at the emitted samples.
    pub creep_rate: Vec<(f64, f64)>,
    /// `(time, d stress/dt)` at the emitted samples.
    pub relaxation_rate: Vec<(f64, f64)>,
    /// `G(∞)·T^(e)(λ₀)` for relaxation tests.
    pub relaxation_asymptote: Option<f64>,
    /// Steady-state hysteresis ratio.
    pub hysteresis: Option<f64>,
    /// Hysteresis ratio of every simulated cycle.
    pub hysteresis_per_cycle: Vec<f64>,
    pub steady_state: Option<bool>,
    /// Strain axis used for the strain-based metrics.
    pub strain_measure: Option<StrainMeasure>,
    pub warnings: Vec<String>,
}

impl TestReport {
    /// Scalar metrics that are present, in a fixed order.
    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        let mut put = |name, v: Option<f64>| {
            if let Some(v) = v {
                out.push((name, v));
            }
        };
        put("youngs_modulus", self.youngs_modulus);
        put("yield_stress", self.yield_stress);
        put("yield_strain", self.yield_strain);
        put("uts", self.uts);
        put("fracture_energy", self.fracture_energy);
        put("relaxation_asymptote", self.relaxation_asymptote);
        put("hysteresis", self.hysteresis);
        if !self.hysteresis_per_cycle.is_empty() {
            out.push(("cycles", self.hysteresis_per_cycle.len() as f64));
        }
        if let Some(s) = self.steady_state {
            out.push(("steady_state", if s { 1.0 } else { 0.0 }));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub series: TestSeries,
    pub report: TestReport,
}

/// Runs whichever protocol `spec` describes.
pub fn run_protocol(spec: &ProtocolSpec, model: &QlvModel) -> Result<TestOutcome> {
    match spec {
        ProtocolSpec::Tensile(s) => run_tensile(s, model),
        ProtocolSpec::Creep(s) => run_creep(s, model),
        ProtocolSpec::Relaxation(s) => run_relaxation(s, model),
        ProtocolSpec::Cyclic(s) => run_cyclic(s, model),
    }
}

/// Constant-rate tensile test.
pub fn run_tensile(spec: &TensileSpec, model: &QlvModel) -> Result<TestOutcome> {
    if !(spec.rate > 0.0 && spec.rate.is_finite()) {
        return Err(Error::invalid("rate", spec.rate, "must be finite and > 0"));
    }
    let sampling = spec.sampling;
    if sampling.steps() == 0 {
        return Err(Error::Domain("tensile drive has zero duration: the series would be empty".into()));
    }
    let measure = model.elastic_law().natural_measure();
    let times = sampling.times();
    let stretches: Vec<f64> = times.iter().map(|t| 1.0 + spec.rate * t).collect();
    let history = StrainHistory::new(times.clone(), stretches.clone(), StrainMeasure::Stretch)?;
    let stress = qlv_stress_fast(model, &history)?.values;

    let mut full = TestSeries::with_capacity(times.len(), measure);
    for i in 0..times.len() {
        full.push(times[i], stretches[i], stress[i]);
    }
    let strain = &full.strain;
    let modulus = initial_slope(strain, &stress);
    let (yield_strain, yield_stress) = match modulus {
        Some(e) => offset_yield(strain, &stress, e).unzip(),
        None => (None, None),
    };
    let uts = stress.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let report = TestReport {
        youngs_modulus: modulus,
        yield_stress,
        yield_strain,
        uts: Some(uts),
        fracture_energy: Some(trapezoid(strain, &stress)),
        strain_measure: Some(measure),
        ..TestReport::default()
    };
    Ok(TestOutcome { series: full.strided(sampling.stride), report })
}

/// Least-squares slope (with intercept) over strains in `[0, 1%]`.
fn initial_slope(strain: &[f64], stress: &[f64]) -> Option<f64> {
    let idx: Vec<usize> = (0..strain.len()).filter(|&i| strain[i] <= MODULUS_WINDOW + 1e-12).collect();
    let idx = if idx.len() >= 2 { idx } else { (0..strain.len().min(2)).collect() };
    if idx.len() < 2 {
        return None;
    }
    let n = idx.len() as f64;
    let mx = idx.iter().map(|&i| strain[i]).sum::<f64>() / n;
    let my = idx.iter().map(|&i| stress[i]).sum::<f64>() / n;
    let sxx: f64 = idx.iter().map(|&i| (strain[i] - mx).powi(2)).sum();
    let sxy: f64 = idx.iter().map(|&i| (strain[i] - mx) * (stress[i] - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// First crossing of the curve with `E·(ε − 0.002)` beyond the offset.
fn offset_yield(strain: &[f64], stress: &[f64], modulus: f64) -> Option<(f64, f64)> {
    let gap = |i: usize| stress[i] - modulus * (strain[i] - YIELD_OFFSET);
    let start = strain.iter().position(|&e| e >= YIELD_OFFSET)?;
    // a straight line parallel to the offset line never meets it
    let tol = 1e-9 * stress.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for i in start.max(1)..strain.len() {
        let (g0, g1) = (gap(i - 1), gap(i));
        if g0 > tol && g1 <= tol {
            let w = g0 / (g0 - g1);
            let e = strain[i - 1] + w * (strain[i] - strain[i - 1]);
            let s = stress[i - 1] + w * (stress[i] - stress[i - 1]);
            return Some((e, s));
        }
    }
    None
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xw, yw)| 0.5 * (yw[0] + yw[1]) * (xw[1] - xw[0])).sum()
}

/// Second-order slopes from the three-point Lagrange stencil: centered in
/// the interior, one-sided at the ends. Two samples fall back to the chord.
pub(crate) fn derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    match n {
        0 | 1 => return vec![0.0; n],
        2 => return vec![(y[1] - y[0]) / (x[1] - x[0]); 2],
        _ => {}
    }
    (0..n)
        .map(|i| {
            let (a, m, b) = match i {
                0 => (0, 1, 2),
                i if i == n - 1 => (n - 3, n - 2, n - 1),
                i => (i - 1, i, i + 1),
            };
            let (x0, x1, x2) = (x[a], x[m], x[b]);
            let xi = x[i];
            y[a] * (2.0 * xi - x1 - x2) / ((x0 - x1) * (x0 - x2))
                + y[m] * (2.0 * xi - x0 - x2) / ((x1 - x0) * (x1 - x2))
                + y[b] * (2.0 * xi - x0 - x1) / ((x2 - x0) * (x2 - x1))
        })
        .collect()
}

/// Creep under constant nominal stress.
///
/// Each step the QLV relation is affine in the new elastic stress, so the
/// elastic stress is solved exactly and the stretch follows from inverting
/// the elastic law (bisection then Newton, bracketed around the previous
/// stretch).
pub fn run_creep(spec: &CreepSpec, model: &QlvModel) -> Result<TestOutcome> {
    if !spec.stress.is_finite() {
        return Err(Error::invalid("stress", spec.stress, "must be finite"));
    }
    let sampling = spec.sampling;
    let law = model.elastic_law();
    let measure = law.natural_measure();
    let times = sampling.times();
    let hold = spec.stress;

    // an impulsive kernel cannot deform instantly
    let te0 = if model.relaxation().impulse() > 0.0 { 0.0 } else { hold / model.prony().initial() };
    let invert = |te: f64, guess: f64, step: usize| {
        law.invert(te, guess).map_err(|e| Error::Numerical { step, reason: e.to_string() })
    };
    let mut lambda = invert(te0, 1.0, 0)?;
    let (mut integ, s0) = QlvIntegrator::start(model, te0);
    let mut full = TestSeries::with_capacity(times.len(), measure);
    full.push(0.0, lambda, s0);
    for (k, &t) in times.iter().enumerate().skip(1) {
        let (a, b) = integ.affine(sampling.dt);
        if !(b > 0.0) {
            return Err(Error::Numerical { step: k, reason: format!("creep update is singular (b = {b})") });
        }
        let te = (hold - a) / b;
        lambda = invert(te, lambda, k)?;
        let stress = integ.advance(sampling.dt, te);
        full.push(t, lambda, stress);
    }
    let rate = derivative(&full.time, &full.strain);
    let report = TestReport {
        creep_rate: full.time.iter().zip(&rate).step_by(sampling.stride).map(|(&t, &r)| (t, r)).collect(),
        strain_measure: Some(measure),
        ..TestReport::default()
    };
    Ok(TestOutcome { series: full.strided(sampling.stride), report })
}

/// Stress relaxation after a stretch step: `T(t) = G(t)·T^(e)(λ₀)`.
pub fn run_relaxation(spec: &RelaxationSpec, model: &QlvModel) -> Result<TestOutcome> {
    if !(spec.stretch > 0.0 && spec.stretch.is_finite()) {
        return Err(Error::invalid("stretch", spec.stretch, "must be finite and > 0"));
    }
    let sampling = spec.sampling;
    let law = model.elastic_law();
    let measure = law.natural_measure();
    let te = law.stress(spec.stretch)?;
    let g = model.relaxation();
    let times = sampling.times();
    let mut full = TestSeries::with_capacity(times.len(), measure);
    for &t in &times {
        full.push(t, spec.stretch, g.value(t)? * te);
    }
    let rate = derivative(&full.time, &full.stress);
    let report = TestReport {
        relaxation_rate: full.time.iter().zip(&rate).step_by(sampling.stride).map(|(&t, &r)| (t, r)).collect(),
        relaxation_asymptote: Some(g.equilibrium() * te),
        strain_measure: Some(measure),
        ..TestReport::default()
    };
    Ok(TestOutcome { series: full.strided(sampling.stride), report })
}

/// Sinusoidal test run to steady state; `H` from the last cycle.
pub fn run_cyclic(spec: &CyclicSpec, model: &QlvModel) -> Result<TestOutcome> {
    spec.validate()?;
    let law = model.elastic_law();
    let measure = law.natural_measure();
    let n = spec.steps_per_cycle;
    let period = 2.0 * std::f64::consts::PI / spec.frequency;
    let dt = period / n as f64;
    let drive = |k: usize| spec.mean - spec.amplitude * (2.0 * std::f64::consts::PI * (k % n) as f64 / n as f64).cos();
    let elastic =
        |lambda: f64, k: usize| law.stress(lambda).map_err(|e| Error::Numerical { step: k, reason: e.to_string() });

    let (mut integ, s0) = QlvIntegrator::start(model, elastic(drive(0), 0)?);
    let mut cycle = TestSeries::with_capacity(n + 1, measure);
    cycle.push(0.0, drive(0), s0);
    let mut per_cycle = Vec::new();
    let mut steady = false;
    let mut step = 0usize;
    let mut start = integ.memory().to_vec();
    for c in 0..spec.max_cycles {
        if c > 0 {
            let (t, l, mut s) = (cycle.time[n], cycle.stretch[n], cycle.stress[n]);
            if c == 1 {
                // skip the slow decay of the start-up transient; exact for
                // the linear memory recursion under a periodic drive
                s += integ.project_periodic(&start, dt, n);
            }
            cycle = TestSeries::with_capacity(n + 1, measure);
            cycle.push(t, l, s);
        }
        if c == 0 {
            start = integ.memory().to_vec();
        }
        for _ in 1..=n {
            step += 1;
            let lambda = drive(step);
            let stress = integ.advance(dt, elastic(lambda, step)?);
            cycle.push(step as f64 * dt, lambda, stress);
        }
        let points: Vec<(f64, f64)> = cycle.strain.iter().copied().zip(cycle.stress.iter().copied()).collect();
        let h = hysteresis_ratio(&points[..=n / 2], &points[n / 2..])?;
        per_cycle.push(h);
        if c + 1 > spec.transient_cycles {
            let prev = per_cycle[c - 1];
            if (h - prev).abs() <= spec.tolerance * h.abs() || h == prev {
                steady = true;
                break;
            }
        }
    }
    let mut report = TestReport {
        hysteresis: per_cycle.last().copied(),
        hysteresis_per_cycle: per_cycle,
        steady_state: Some(steady),
        strain_measure: Some(measure),
        ..TestReport::default()
    };
    if !steady {
        report.warnings.push(format!(
            "hysteresis did not settle within {} cycles at frequency {}",
            spec.max_cycles, spec.frequency
        ));
    }
    Ok(TestOutcome { series: cycle.strided(spec.stride), report })
}

/// One point of a frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub frequency: f64,
    pub hysteresis: f64,
    pub cycles: usize,
    pub steady_state: bool,
}

/// `count` log-spaced values from `from` to `to` inclusive.
pub fn log_space(from: f64, to: f64, count: usize) -> Result<Vec<f64>> {
    if !(from > 0.0 && to > from && from.is_finite() && to.is_finite()) {
        return Err(Error::Domain(format!("log spacing needs 0 < from < to, got [{from}, {to}]")));
    }
    if count < 2 {
        return Err(Error::Domain(format!("log spacing needs at least 2 points, got {count}")));
    }
    let (a, b) = (from.ln(), to.ln());
    let mut v: Vec<f64> = (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect();
    v[0] = from;
    v[count - 1] = to;
    Ok(v)
}

/// Runs [`run_cyclic`] at every frequency (in parallel); results keep the
/// order of `frequencies`.
pub fn hysteresis_sweep(base: &CyclicSpec, model: &QlvModel, frequencies: &[f64]) -> Result<Vec<SweepPoint>> {
    frequencies
        .par_iter()
        .map(|&frequency| {
            let spec = CyclicSpec { frequency, ..*base };
            let out = run_cyclic(&spec, model)?;
            Ok(SweepPoint {
                frequency,
                hysteresis: out.report.hysteresis.unwrap_or(f64::NAN),
                cycles: out.report.hysteresis_per_cycle.len(),
                steady_state: out.report.steady_state == Some(true),
            })
        })
        .collect()
}
