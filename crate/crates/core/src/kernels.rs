//! Creep and relaxation kernels.
//!
//! The classical elements (Maxwell, Voigt, Kelvin) are given in absolute
//! units (force per unit displacement). [`ReducedRelaxation`] holds the
//! normalized form `G(t) = g(t)/g(0⁺)` used by the QLV evaluators.
//!
//! Absolute creep and relaxation functions follow the unit-step convention
//! `1(0) = ½`, so their value exactly at `t = 0` is half the right limit.
//! Reduced relaxations are evaluated as right limits: `G(0) = 1`.

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::special::{e1_unchecked, ein, integrate};

/// `1` for `t > 0`, `½` at `t = 0`, `0` for `t < 0`.
pub fn unit_step(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t == 0.0 {
        0.5
    } else {
        0.0
    }
}

/// Spring and dashpot in series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxwellParams {
    mu: f64,
    eta: f64,
}

impl MaxwellParams {
    pub fn new(mu: f64, eta: f64) -> Result<Self> {
        require_positive("mu", mu)?;
        require_positive("eta", eta)?;
        Ok(Self { mu, eta })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `η/μ`.
    pub fn relaxation_time(&self) -> f64 {
        self.eta / self.mu
    }
}

/// `c(t) = (1/μ + t/η)·1(t)`.
pub fn maxwell_creep(p: &MaxwellParams, t: f64) -> f64 {
    (1.0 / p.mu + t / p.eta) * unit_step(t)
}

/// `g(t) = μ·exp(−μt/η)·1(t)`.
pub fn maxwell_relaxation(p: &MaxwellParams, t: f64) -> f64 {
    p.mu * (-p.mu * t / p.eta).exp() * unit_step(t)
}

/// Spring and dashpot in parallel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoigtParams {
    mu: f64,
    eta: f64,
}

impl VoigtParams {
    pub fn new(mu: f64, eta: f64) -> Result<Self> {
        require_positive("mu", mu)?;
        require_positive("eta", eta)?;
        Ok(Self { mu, eta })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn retardation_time(&self) -> f64 {
        self.eta / self.mu
    }
}

/// `c(t) = (1/μ)·(1 − exp(−μt/η))·1(t)`.
pub fn voigt_creep(p: &VoigtParams, t: f64) -> f64 {
    -(-p.mu * t / p.eta).exp_m1() / p.mu * unit_step(t)
}

/// Voigt relaxation `g(t) = η·δ(t) + μ·1(t)`, split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoigtRelaxation {
    /// Weight of the Dirac impulse at `t = 0`; `None` before the origin.
    pub impulse: Option<f64>,
    /// The regular part `μ·1(t)`.
    pub regular: f64,
}

pub fn voigt_relaxation(p: &VoigtParams, t: f64) -> VoigtRelaxation {
    VoigtRelaxation { impulse: (t >= 0.0).then_some(p.eta), regular: p.mu * unit_step(t) }
}

/// Standard linear solid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KelvinParams {
    e_r: f64,
    tau_eps: f64,
    tau_sigma: f64,
}

impl KelvinParams {
    /// Requires `E_R > 0` and `0 < τ_ε ≤ τ_σ`.
    pub fn new(e_r: f64, tau_eps: f64, tau_sigma: f64) -> Result<Self> {
        require_positive("E_R", e_r)?;
        require_positive("tau_eps", tau_eps)?;
        require_positive("tau_sigma", tau_sigma)?;
        if tau_eps > tau_sigma {
            return Err(Error::invalid("tau_eps", tau_eps, format!("must not exceed tau_sigma = {tau_sigma}")));
        }
        Ok(Self { e_r, tau_eps, tau_sigma })
    }

    pub fn e_r(&self) -> f64 {
        self.e_r
    }

    pub fn tau_eps(&self) -> f64 {
        self.tau_eps
    }

    pub fn tau_sigma(&self) -> f64 {
        self.tau_sigma
    }

    /// `g(0⁺) = E_R·τ_σ/τ_ε`.
    pub fn instantaneous_modulus(&self) -> f64 {
        self.e_r * self.tau_sigma / self.tau_eps
    }

    /// `c(0⁺) = τ_ε/(τ_σ·E_R)`.
    pub fn instantaneous_compliance(&self) -> f64 {
        self.tau_eps / (self.tau_sigma * self.e_r)
    }

    /// `g(∞) = E_R`.
    pub fn relaxed_modulus(&self) -> f64 {
        self.e_r
    }

    /// `c(∞) = 1/E_R`.
    pub fn relaxed_compliance(&self) -> f64 {
        1.0 / self.e_r
    }
}

/// `c(t) = (1/E_R)·(1 − (1 − τ_ε/τ_σ)·exp(−t/τ_σ))·1(t)`.
pub fn kelvin_creep(p: &KelvinParams, t: f64) -> f64 {
    let a = 1.0 - p.tau_eps / p.tau_sigma;
    (1.0 - a * (-t / p.tau_sigma).exp()) / p.e_r * unit_step(t)
}

/// `g(t) = E_R·(1 − (1 − τ_σ/τ_ε)·exp(−t/τ_ε))·1(t)`.
pub fn kelvin_relaxation(p: &KelvinParams, t: f64) -> f64 {
    let a = 1.0 - p.tau_sigma / p.tau_eps;
    p.e_r * (1.0 - a * (-t / p.tau_eps).exp()) * unit_step(t)
}

/// One exponential term `α·exp(−ν·t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PronyTerm {
    pub amplitude: f64,
    pub frequency: f64,
}

/// `g(t) = K + Σ αₙ·exp(−νₙ·t)` with `αₙ ≥ 0` and `νₙ > 0` strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PronySpectrum {
    equilibrium: f64,
    terms: Vec<PronyTerm>,
}

impl PronySpectrum {
    /// Builds a spectrum from `(amplitude, frequency)` pairs in any order.
    ///
    /// Terms are sorted by frequency; repeated frequencies are rejected.
    pub fn new(equilibrium: f64, terms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        if !equilibrium.is_finite() {
            return Err(Error::invalid("K", equilibrium, "must be finite"));
        }
        let mut terms: Vec<PronyTerm> =
            terms.into_iter().map(|(amplitude, frequency)| PronyTerm { amplitude, frequency }).collect();
        for t in &terms {
            require_non_negative("amplitude", t.amplitude)?;
            require_positive("frequency", t.frequency)?;
        }
        terms.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
        if let Some(w) = terms.windows(2).find(|w| w[0].frequency == w[1].frequency) {
            return Err(Error::invalid("frequency", w[0].frequency, "frequencies must be distinct"));
        }
        Ok(Self { equilibrium, terms })
    }

    /// A constant kernel with no transient terms.
    pub fn constant(equilibrium: f64) -> Result<Self> {
        Self::new(equilibrium, [])
    }

    pub fn equilibrium(&self) -> f64 {
        self.equilibrium
    }

    pub fn terms(&self) -> &[PronyTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `g(0) = K + Σαₙ`.
    pub fn initial(&self) -> f64 {
        self.equilibrium + self.terms.iter().map(|t| t.amplitude).sum::<f64>()
    }

    /// `g(t)` for `t ≥ 0`; negative times are clamped to the origin.
    pub fn value(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        self.equilibrium + self.terms.iter().map(|term| term.amplitude * (-term.frequency * t).exp()).sum::<f64>()
    }

    /// All coefficients multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        require_positive("factor", factor)?;
        Ok(Self {
            equilibrium: self.equilibrium * factor,
            terms: self
                .terms
                .iter()
                .map(|t| PronyTerm { amplitude: t.amplitude * factor, frequency: t.frequency })
                .collect(),
        })
    }

    /// Divides by `g(0)` so that the result starts at 1.
    pub fn normalized(&self) -> Result<Self> {
        let g0 = self.initial();
        if !(g0 > 0.0) {
            return Err(Error::Domain(format!("cannot normalize a spectrum with g(0) = {g0}")));
        }
        self.scaled(1.0 / g0)
    }

    /// Smallest and largest characteristic time `1/ν`, if any terms exist.
    pub fn time_range(&self) -> Option<(f64, f64)> {
        let first = self.terms.first()?;
        let last = self.terms.last()?;
        Some((1.0 / last.frequency, 1.0 / first.frequency))
    }
}

/// `g(t) = K + Σ αₙ·exp(−νₙ·t)`.
pub fn prony_relaxation(s: &PronySpectrum, t: f64) -> f64 {
    s.value(t)
}

/// Continuous spectrum `S(q) = c/q` on `[q₁, q₂]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FungSpectrum {
    c: f64,
    q1: f64,
    q2: f64,
}

impl FungSpectrum {
    pub fn new(c: f64, q1: f64, q2: f64) -> Result<Self> {
        require_positive("c", c)?;
        require_positive("q1", q1)?;
        require_positive("q2", q2)?;
        if q1 >= q2 {
            return Err(Error::invalid("q1", q1, format!("must be < q2 = {q2}")));
        }
        Ok(Self { c, q1, q2 })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn q1(&self) -> f64 {
        self.q1
    }

    pub fn q2(&self) -> f64 {
        self.q2
    }

    /// `G(∞) = 1/(1 + c·ln(q₂/q₁))`.
    pub fn equilibrium(&self) -> f64 {
        1.0 / (1.0 + self.c * (self.q2 / self.q1).ln())
    }
}

/// Closed form of the reduced relaxation for the `c/q` spectrum:
///
/// ```text
/// G(t) = [1 + c·(E₁(t/q₂) − E₁(t/q₁))] / [1 + c·ln(q₂/q₁)]
/// ```
pub fn fung_reduced_relaxation(s: &FungSpectrum, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("relaxation time must be >= 0, got {t}")));
    }
    let log_ratio = (s.q2 / s.q1).ln();
    let denom = 1.0 + s.c * log_ratio;
    if t == 0.0 {
        return Ok(1.0);
    }
    let x1 = t / s.q1;
    let x2 = t / s.q2;
    let diff = if x1 <= 1.0 {
        // E₁(x) = Ein(x) − γ − ln x; the logarithms combine exactly
        log_ratio + ein(x2) - ein(x1)
    } else {
        e1_unchecked(x2) - e1_unchecked(x1)
    };
    Ok((1.0 + s.c * diff) / denom)
}

/// Reference evaluation by adaptive quadrature of
/// `[1 + ∫ S(q)·exp(−t/q) dq] / [1 + ∫ S(q) dq]` over `[q₁, q₂]`.
pub fn fung_reduced_relaxation_quadrature(s: &FungSpectrum, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("relaxation time must be >= 0, got {t}")));
    }
    // u = ln q turns c/q dq into c du
    let (u1, u2) = (s.q1.ln(), s.q2.ln());
    let num = integrate(|u: f64| s.c * (-t * (-u).exp()).exp(), u1, u2, 1e-300, 1e-14)?;
    let den = s.c * (u2 - u1);
    Ok((1.0 + num) / (1.0 + den))
}

/// Discretizes the `c/q` spectrum into `n_terms` exponentials.
///
/// `ln q` over `[ln q₁, ln q₂]` is split into equal cells; each cell becomes
/// one term at its midpoint with weight `c·h`. The result is normalized so
/// that `K + Σαₙ = 1`.
pub fn fung_to_prony(s: &FungSpectrum, n_terms: usize) -> Result<PronySpectrum> {
    if n_terms < 2 {
        return Err(Error::Domain(format!("Prony discretization needs at least 2 terms, got {n_terms}")));
    }
    let log_ratio = (s.q2 / s.q1).ln();
    let h = log_ratio / n_terms as f64;
    let denom = 1.0 + s.c * log_ratio;
    let amplitude = s.c * h / denom;
    let terms = (0..n_terms).map(|j| {
        let q = s.q1 * ((j as f64 + 0.5) * h).exp();
        (amplitude, 1.0 / q)
    });
    PronySpectrum::new(1.0 / denom, terms)
}

/// How a [`ReducedRelaxation`] is evaluated pointwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvaluationMethod {
    #[default]
    ClosedForm,
    /// Numerical integration over the spectrum (Fung only; discrete kernels
    /// fall back to their closed form).
    Quadrature,
    /// Evaluate through a Prony discretization with this many terms.
    PronyApproximation { terms: usize },
}

/// Normalized kernel families.
#[derive(Debug, Clone, PartialEq)]
pub enum ReducedKernel {
    /// `G ≡ 1`.
    Elastic,
    /// `G = exp(−t/τ)`, `τ = η/μ`.
    Maxwell {
        tau: f64,
    },
    /// `G = 1 + (η/μ)·δ(t)`; the impulse weight carries units of time.
    Voigt {
        tau: f64,
    },
    /// `G = (1 + S·exp(−t/q))/(1 + S)` with `q = τ_ε`, `S = τ_σ/τ_ε − 1`.
    Kelvin {
        tau_eps: f64,
        tau_sigma: f64,
    },
    /// Any Prony spectrum with `G(0) = 1`.
    Prony(PronySpectrum),
    Fung(FungSpectrum),
}

/// A reduced relaxation function `G(t)` with `G(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedRelaxation {
    kernel: ReducedKernel,
    method: EvaluationMethod,
}

impl ReducedRelaxation {
    pub fn elastic() -> Self {
        Self { kernel: ReducedKernel::Elastic, method: EvaluationMethod::ClosedForm }
    }

    pub fn maxwell(p: &MaxwellParams) -> Self {
        Self { kernel: ReducedKernel::Maxwell { tau: p.relaxation_time() }, method: EvaluationMethod::ClosedForm }
    }

    pub fn voigt(p: &VoigtParams) -> Self {
        Self { kernel: ReducedKernel::Voigt { tau: p.retardation_time() }, method: EvaluationMethod::ClosedForm }
    }

    pub fn kelvin(p: &KelvinParams) -> Self {
        Self {
            kernel: ReducedKernel::Kelvin { tau_eps: p.tau_eps, tau_sigma: p.tau_sigma },
            method: EvaluationMethod::ClosedForm,
        }
    }

    /// Normalizes `s` by its initial value.
    pub fn prony(s: &PronySpectrum) -> Result<Self> {
        Ok(Self { kernel: ReducedKernel::Prony(s.normalized()?), method: EvaluationMethod::ClosedForm })
    }

    pub fn fung(s: FungSpectrum) -> Self {
        Self { kernel: ReducedKernel::Fung(s), method: EvaluationMethod::ClosedForm }
    }

    pub fn with_method(mut self, method: EvaluationMethod) -> Result<Self> {
        if let EvaluationMethod::PronyApproximation { terms } = method {
            if terms < 2 {
                return Err(Error::Domain(format!("Prony approximation needs at least 2 terms, got {terms}")));
            }
        }
        self.method = method;
        Ok(self)
    }

    pub fn kernel(&self) -> &ReducedKernel {
        &self.kernel
    }

    pub fn method(&self) -> EvaluationMethod {
        self.method
    }

    /// Regular part of `G(t)` (right limit at the origin, `0` before it).
    pub fn value(&self, t: f64) -> Result<f64> {
        if t.is_nan() {
            return Err(Error::Domain("relaxation time is NaN".into()));
        }
        if t < 0.0 {
            return Ok(0.0);
        }
        if let EvaluationMethod::PronyApproximation { terms } = self.method {
            return Ok(self.to_prony(terms)?.value(t));
        }
        Ok(match &self.kernel {
            ReducedKernel::Elastic | ReducedKernel::Voigt { .. } => 1.0,
            ReducedKernel::Maxwell { tau } => (-t / tau).exp(),
            ReducedKernel::Kelvin { tau_eps, tau_sigma } => {
                let r = tau_eps / tau_sigma;
                r + (1.0 - r) * (-t / tau_eps).exp()
            }
            ReducedKernel::Prony(s) => s.value(t),
            ReducedKernel::Fung(s) => match self.method {
                EvaluationMethod::Quadrature => fung_reduced_relaxation_quadrature(s, t)?,
                _ => fung_reduced_relaxation(s, t)?,
            },
        })
    }

    /// Weight of the Dirac impulse at the origin (time units; Voigt only).
    pub fn impulse(&self) -> f64 {
        match self.kernel {
            ReducedKernel::Voigt { tau } => tau,
            _ => 0.0,
        }
    }

    /// `G(∞)`.
    pub fn equilibrium(&self) -> f64 {
        match &self.kernel {
            ReducedKernel::Elastic | ReducedKernel::Voigt { .. } => 1.0,
            ReducedKernel::Maxwell { .. } => 0.0,
            ReducedKernel::Kelvin { tau_eps, tau_sigma } => tau_eps / tau_sigma,
            ReducedKernel::Prony(s) => s.equilibrium(),
            ReducedKernel::Fung(s) => s.equilibrium(),
        }
    }

    /// Shortest and longest characteristic times, `None` for time-free kernels.
    pub fn time_range(&self) -> Option<(f64, f64)> {
        match &self.kernel {
            ReducedKernel::Elastic => None,
            ReducedKernel::Maxwell { tau } | ReducedKernel::Voigt { tau } => Some((*tau, *tau)),
            ReducedKernel::Kelvin { tau_eps, tau_sigma } => Some((*tau_eps, *tau_sigma)),
            ReducedKernel::Prony(s) => s.time_range(),
            ReducedKernel::Fung(s) => Some((s.q1, s.q2)),
        }
    }

    /// Whether [`to_prony`](Self::to_prony) is exact rather than a
    /// discretization.
    pub fn is_discrete(&self) -> bool {
        !matches!(self.kernel, ReducedKernel::Fung(_))
    }

    /// The regular part as a normalized Prony spectrum.
    ///
    /// Discrete kernels convert exactly and ignore `n_terms`; the Fung
    /// spectrum is discretized with [`fung_to_prony`].
    pub fn to_prony(&self, n_terms: usize) -> Result<PronySpectrum> {
        match &self.kernel {
            ReducedKernel::Elastic | ReducedKernel::Voigt { .. } => PronySpectrum::constant(1.0),
            ReducedKernel::Maxwell { tau } => PronySpectrum::new(0.0, [(1.0, 1.0 / tau)]),
            ReducedKernel::Kelvin { tau_eps, tau_sigma } => {
                let r = tau_eps / tau_sigma;
                if r == 1.0 {
                    PronySpectrum::constant(1.0)
                } else {
                    PronySpectrum::new(r, [(1.0 - r, 1.0 / tau_eps)])
                }
            }
            ReducedKernel::Prony(s) => Ok(s.clone()),
            ReducedKernel::Fung(s) => fung_to_prony(s, n_terms),
        }
    }
}
