//! Quasi-linear viscoelastic stress evaluation.
//!
//! The stress is the hereditary integral of the reduced relaxation `G`
//! against the rate of the instantaneous elastic stress `T^(e)`:
//!
//! ```text
//! T(t) = G(t)·T^(e)(x(0)) + ∫₀ᵗ G(t − τ)·dT^(e)/dτ dτ  [+ impulse·dT^(e)/dt]
//! ```
//!
//! The specimen is quiescent before `t = 0`; a nonzero first sample acts as
//! a step at the origin. Strain is interpolated linearly between samples,
//! and so is `T^(e)` on each step (exact end-point increments).
//!
//! Two evaluators are provided: [`qlv_stress_fast`], an O(N·terms)
//! internal-variable recursion on the model's Prony spectrum, and
//! [`qlv_stress_direct`], the O(N²) midpoint-rule convolution used as an
//! oracle.

use crate::constitutive::{ElasticLaw, StrainMeasure};
use crate::error::{Error, Result};
use crate::kernels::{PronySpectrum, ReducedRelaxation};

/// Strain (or stretch) samples on a time grid starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainHistory {
    times: Vec<f64>,
    values: Vec<f64>,
    measure: StrainMeasure,
}

impl StrainHistory {
    pub fn new(times: Vec<f64>, values: Vec<f64>, measure: StrainMeasure) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Domain("strain history is empty".into()));
        }
        if times.len() != values.len() {
            return Err(Error::Domain(format!("strain history has {} times but {} values", times.len(), values.len())));
        }
        if times[0] != 0.0 {
            return Err(Error::Domain(format!("strain history must start at t = 0, got {}", times[0])));
        }
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::Domain(format!(
                    "sample times must be strictly increasing: t[{}] = {} follows {}",
                    i + 1,
                    w[1],
                    w[0]
                )));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("strain value at sample {i} is not finite")));
        }
        Ok(Self { times, values, measure })
    }

    /// Samples `f` on `n` points spaced `dt` apart.
    pub fn uniform(dt: f64, n: usize, measure: StrainMeasure, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be > 0, got {dt}")));
        }
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values, measure)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn measure(&self) -> StrainMeasure {
        self.measure
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Extension ratio at every sample.
    pub fn stretches(&self) -> Vec<f64> {
        self.values.iter().map(|&v| self.measure.to_stretch(v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressHistory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl StressHistory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Elastic law plus reduced relaxation, with the Prony spectrum used by
/// the fast evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct QlvModel {
    elastic: ElasticLaw,
    relaxation: ReducedRelaxation,
    prony: PronySpectrum,
    prony_tolerance: f64,
}

impl QlvModel {
    /// `prony_terms` is used only for continuous spectra; discrete kernels
    /// convert exactly.
    pub fn new(elastic: ElasticLaw, relaxation: ReducedRelaxation, prony_terms: usize) -> Result<Self> {
        let prony = relaxation.to_prony(prony_terms)?;
        let prony_tolerance = if relaxation.is_discrete() { 0.0 } else { approximation_error(&relaxation, &prony)? };
        Ok(Self { elastic, relaxation, prony, prony_tolerance })
    }

    /// A model whose relaxation is exactly the (normalized) spectrum.
    pub fn from_prony(elastic: ElasticLaw, spectrum: &PronySpectrum) -> Result<Self> {
        let relaxation = ReducedRelaxation::prony(spectrum)?;
        Self::new(elastic, relaxation, 0)
    }

    /// `G ≡ 1`.
    pub fn elastic(elastic: ElasticLaw) -> Self {
        Self {
            elastic,
            relaxation: ReducedRelaxation::elastic(),
            prony: PronySpectrum::constant(1.0).expect("constant spectrum"),
            prony_tolerance: 0.0,
        }
    }

    pub fn elastic_law(&self) -> &ElasticLaw {
        &self.elastic
    }

    pub fn relaxation(&self) -> &ReducedRelaxation {
        &self.relaxation
    }

    pub fn prony(&self) -> &PronySpectrum {
        &self.prony
    }

    /// Largest `|G − G_prony|` on a log grid spanning the spectrum (zero for
    /// discrete kernels).
    pub fn prony_tolerance(&self) -> f64 {
        self.prony_tolerance
    }

    /// Instantaneous elastic stress at every sample.
    pub fn elastic_stresses(&self, history: &StrainHistory) -> Result<Vec<f64>> {
        history
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let lambda = history.measure().to_stretch(v);
                self.elastic
                    .stress(lambda)
                    .map_err(|e| Error::Domain(format!("sample {i} (t = {}): {e}", history.times()[i])))
            })
            .collect()
    }
}

fn approximation_error(g: &ReducedRelaxation, prony: &PronySpectrum) -> Result<f64> {
    let Some((lo, hi)) = g.time_range() else {
        return Ok(0.0);
    };
    let (a, b) = ((lo / 10.0).ln(), (hi * 10.0).ln());
    let mut worst = 0.0_f64;
    for k in 0..=400 {
        let t = (a + (b - a) * k as f64 / 400.0).exp();
        worst = worst.max((g.value(t)? - prony.value(t)).abs());
    }
    Ok(worst)
}

/// `−expm1(−x)/x`, the mean of `exp(−s)` over `[0, x]`.
fn mean_decay(x: f64) -> f64 {
    if x < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// Step-by-step form of the fast evaluator.
///
/// Each Prony term carries `hₙ(t) = ∫ αₙ·exp(−νₙ(t − τ))·dT^(e)`, updated by
/// `hₙ ← exp(−νₙΔt)·hₙ + αₙ·φ(νₙΔt)·ΔT^(e)` with `φ(x) = (1 − e⁻ˣ)/x`, which
/// is exact for `T^(e)` linear over the step. A Voigt impulse adds
/// `impulse·dT^(e)/dt` with the rate from variable-step BDF2 (backward
/// Euler on the first step).
#[derive(Debug, Clone)]
pub struct QlvIntegrator<'a> {
    prony: &'a PronySpectrum,
    impulse: f64,
    h: Vec<f64>,
    te: f64,
    te_prev: f64,
    dt_prev: Option<f64>,
    cache_dt: f64,
    cache: Vec<(f64, f64)>,
}

impl<'a> QlvIntegrator<'a> {
    /// Starts from a quiescent state with elastic stress `te0` at `t = 0`;
    /// returns the stress at the origin.
    pub fn start(model: &'a QlvModel, te0: f64) -> (Self, f64) {
        let prony = &model.prony;
        let h: Vec<f64> = prony.terms().iter().map(|t| t.amplitude * te0).collect();
        let stress = prony.equilibrium() * te0 + h.iter().sum::<f64>();
        let integrator = Self {
            prony,
            impulse: model.relaxation.impulse(),
            h,
            te: te0,
            te_prev: te0,
            dt_prev: None,
            cache_dt: f64::NAN,
            cache: Vec::new(),
        };
        (integrator, stress)
    }

    pub fn elastic_stress(&self) -> f64 {
        self.te
    }

    fn refresh(&mut self, dt: f64) {
        if dt.to_bits() != self.cache_dt.to_bits() {
            self.cache_dt = dt;
            self.cache = self
                .prony
                .terms()
                .iter()
                .map(|t| {
                    let x = t.frequency * dt;
                    ((-x).exp(), t.amplitude * mean_decay(x))
                })
                .collect();
        }
    }

    /// Rate coefficients `(c_new, c_rest)` so that
    /// `dT^(e)/dt ≈ c_new·te_new + c_rest`.
    fn rate_coefficients(&self, dt: f64) -> (f64, f64) {
        match self.dt_prev {
            None => (1.0 / dt, -self.te / dt),
            Some(prev) => {
                let w = dt / prev;
                let c0 = (1.0 + 2.0 * w) / (1.0 + w) / dt;
                let c1 = -(1.0 + w) / dt;
                let c2 = w * w / (1.0 + w) / dt;
                (c0, c1 * self.te + c2 * self.te_prev)
            }
        }
    }

    /// The stress after a step of `dt` is `a + b·te_new`; returns `(a, b)`.
    pub fn affine(&mut self, dt: f64) -> (f64, f64) {
        self.refresh(dt);
        let mut a = 0.0;
        let mut b = self.prony.equilibrium();
        for (h, &(decay, weight)) in self.h.iter().zip(&self.cache) {
            a += decay * h - weight * self.te;
            b += weight;
        }
        if self.impulse != 0.0 {
            let (c_new, c_rest) = self.rate_coefficients(dt);
            a += self.impulse * c_rest;
            b += self.impulse * c_new;
        }
        (a, b)
    }

    /// Internal variables of the Prony terms.
    pub fn memory(&self) -> &[f64] {
        &self.h
    }

    /// Moves the memory to the fixed point of a periodic drive.
    ///
    /// `start` is the memory one period ago, the period being `steps`
    /// steps of `dt`, all taken with the same step. Each term obeys
    /// `h_end = D·h_start + F` with `D = e^(−ν·period)`, so the periodic
    /// state is `F / (1 − D)`. Returns the resulting change in stress.
    pub fn project_periodic(&mut self, start: &[f64], dt: f64, steps: usize) -> f64 {
        self.refresh(dt);
        let mut shift = 0.0;
        for ((h, &h0), &(decay, _)) in self.h.iter_mut().zip(start).zip(&self.cache) {
            let log_d = steps as f64 * decay.ln();
            let one_minus_d = -log_d.exp_m1();
            if one_minus_d <= 0.0 {
                continue;
            }
            let forced = *h - log_d.exp() * h0;
            let fixed = forced / one_minus_d;
            shift += fixed - *h;
            *h = fixed;
        }
        shift
    }

    /// Advances by `dt` to elastic stress `te_new`; returns the stress.
    pub fn advance(&mut self, dt: f64, te_new: f64) -> f64 {
        self.refresh(dt);
        let delta = te_new - self.te;
        let mut stress = self.prony.equilibrium() * te_new;
        for (h, &(decay, weight)) in self.h.iter_mut().zip(&self.cache) {
            *h = decay * *h + weight * delta;
            stress += *h;
        }
        if self.impulse != 0.0 {
            let (c_new, c_rest) = self.rate_coefficients(dt);
            stress += self.impulse * (c_new * te_new + c_rest);
        }
        self.te_prev = self.te;
        self.te = te_new;
        self.dt_prev = Some(dt);
        stress
    }
}

/// Fast evaluation on the model's Prony spectrum.
pub fn qlv_stress_fast(model: &QlvModel, history: &StrainHistory) -> Result<StressHistory> {
    let te = model.elastic_stresses(history)?;
    let times = history.times();
    let (mut integ, s0) = QlvIntegrator::start(model, te[0]);
    let mut values = Vec::with_capacity(te.len());
    values.push(s0);
    // a nominal step keeps the decay-factor cache warm on uniform grids
    let uniform = uniform_step(times);
    for i in 1..te.len() {
        let dt = uniform.unwrap_or(times[i] - times[i - 1]);
        values.push(integ.advance(dt, te[i]));
    }
    check_finite(&values)?;
    Ok(StressHistory { times: times.to_vec(), values })
}

/// Which kernel the direct evaluator convolves with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectKernel {
    /// The model's reduced relaxation, evaluated by its configured method.
    #[default]
    Exact,
    /// The model's Prony spectrum (the one the fast path uses).
    Prony,
}

/// Direct O(N²) evaluation with the model's exact relaxation function.
pub fn qlv_stress_direct(model: &QlvModel, history: &StrainHistory) -> Result<StressHistory> {
    qlv_stress_direct_with(model, history, DirectKernel::Exact)
}

/// Direct O(N²) convolution:
/// `T(tᵢ) = G(tᵢ)·T^(e)₀ + Σₘ G(tᵢ − τₘ)·ΔT^(e)ₘ` with `τₘ` the midpoint of
/// step `m`.
pub fn qlv_stress_direct_with(
    model: &QlvModel,
    history: &StrainHistory,
    kernel: DirectKernel,
) -> Result<StressHistory> {
    let te = model.elastic_stresses(history)?;
    let times = history.times();
    let n = te.len();
    let g = |t: f64| -> Result<f64> {
        match kernel {
            DirectKernel::Exact => model.relaxation.value(t),
            DirectKernel::Prony => Ok(model.prony.value(t)),
        }
    };
    let delta: Vec<f64> = te.windows(2).map(|w| w[1] - w[0]).collect();
    let mids: Vec<f64> = times.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let rates = elastic_rates(times, &te);
    let impulse = model.relaxation.impulse();

    let mut values = Vec::with_capacity(n);
    if let Some(dt) = uniform_step(times) {
        // G(tᵢ − τₘ) depends only on i − m
        let lag: Vec<f64> = (0..n.saturating_sub(1)).map(|k| g((k as f64 + 0.5) * dt)).collect::<Result<_>>()?;
        for i in 0..n {
            let mut s = g(times[i])? * te[0];
            for m in 0..i {
                s += lag[i - 1 - m] * delta[m];
            }
            values.push(s + impulse * rates[i]);
        }
    } else {
        for i in 0..n {
            let mut s = g(times[i])? * te[0];
            for m in 0..i {
                s += g(times[i] - mids[m])? * delta[m];
            }
            values.push(s + impulse * rates[i]);
        }
    }
    check_finite(&values)?;
    Ok(StressHistory { times: times.to_vec(), values })
}

fn uniform_step(times: &[f64]) -> Option<f64> {
    if times.len() < 2 {
        return Some(1.0);
    }
    let n = times.len() - 1;
    let dt = times[n] / n as f64;
    let tol = 1e-12 * times[n];
    times.iter().enumerate().all(|(i, &t)| (t - i as f64 * dt).abs() <= tol).then_some(dt)
}

/// `dT^(e)/dt` at each sample by backward Euler then variable-step BDF2;
/// zero at the origin.
pub fn elastic_rates(times: &[f64], te: &[f64]) -> Vec<f64> {
    let mut rates = vec![0.0; te.len()];
    for i in 1..te.len() {
        let dt = times[i] - times[i - 1];
        rates[i] = if i == 1 {
            (te[1] - te[0]) / dt
        } else {
            let w = dt / (times[i - 1] - times[i - 2]);
            ((1.0 + 2.0 * w) / (1.0 + w) * te[i] - (1.0 + w) * te[i - 1] + w * w / (1.0 + w) * te[i - 2]) / dt
        };
    }
    rates
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(step) => Err(Error::Numerical { step, reason: "stress is not finite".into() }),
        None => Ok(()),
    }
}

/// `max|a − b| / max|b|`.
pub fn max_relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let dev = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        dev
    } else {
        dev / scale
    }
}

/// Area enclosed by a closed polygon of `(strain, stress)` points.
pub fn loop_area(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    let mut twice = 0.0;
    for i in 0..n {
        let (x0, y0) = points[i];
        let (x1, y1) = points[(i + 1) % n];
        twice += x0 * y1 - x1 * y0;
    }
    0.5 * twice.abs()
}

/// Loop area divided by the area under the loading branch.
///
/// Both branches are `(strain, stress)` sequences; loading strain must be
/// non-decreasing, unloading non-increasing, and the two must meet at both
/// ends. The loop area uses the shoelace formula on the closed polygon, the
/// loading area the trapezoid rule measured from zero stress.
pub fn hysteresis_ratio(loading: &[(f64, f64)], unloading: &[(f64, f64)]) -> Result<f64> {
    if loading.len() < 2 || unloading.len() < 2 {
        return Err(Error::Domain("each loop branch needs at least two points".into()));
    }
    if loading.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::Domain("loading strain must be non-decreasing".into()));
    }
    if unloading.windows(2).any(|w| w[1].0 > w[0].0) {
        return Err(Error::Domain("unloading strain must be non-increasing".into()));
    }
    let (lo, hi) = (loading[0].0, loading[loading.len() - 1].0);
    let tol = 1e-9 * (hi - lo).abs().max(f64::MIN_POSITIVE);
    if (unloading[0].0 - hi).abs() > tol || (unloading[unloading.len() - 1].0 - lo).abs() > tol {
        return Err(Error::Domain(format!(
            "branches do not span the same strain interval: loading [{lo}, {hi}], unloading [{}, {}]",
            unloading[unloading.len() - 1].0,
            unloading[0].0
        )));
    }
    let mut polygon = loading.to_vec();
    polygon.extend_from_slice(unloading);
    let area = loop_area(&polygon);
    let under: f64 = loading.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    if !(under > 0.0) || !under.is_finite() {
        return Err(Error::Domain(format!("hysteresis ratio undefined: area under the loading branch is {under}")));
    }
    Ok(area / under)
}
