//! Nonlinear elastic laws.
//!
//! Two families are provided:
//!
//! * the exponential uniaxial law, obtained by integrating the linear
//!   slope–stress relation `dT/dλ = B·T + C` from the zero-stress state
//!   `T(1) = 0`:
//!
//!   ```text
//!   T(λ) = (C/B)·(exp(B·(λ − 1)) − 1)
//!   ```
//!
//! * the Fung-type biaxial strain-energy density in the Green strain
//!   components, whose partial derivatives are the second Piola–Kirchhoff
//!   stresses:
//!
//!   ```text
//!   ρ₀W = ½(α₁E₁₁² + α₂E₂₂² + α₃E₁₂² + α₃E₂₁² + 2α₄E₁₁E₂₂) + ½c·exp(Q)
//!   Q   = a₁E₁₁² + a₂E₂₂² + a₃E₁₂² + a₃E₂₁² + 2a₄E₁₁E₂₂
//!         + γ₁E₁₁³ + γ₂E₂₂³ + γ₄E₁₁²E₂₂ + γ₅E₁₁E₂₂²
//!   ```
//!
//! [`ElasticLaw`] wraps both (plus a linear spring used as a reference
//! specimen) behind a single uniaxial interface in terms of stretch.

use crate::error::{require_finite, require_non_negative, require_positive, Error, Result};

/// Largest exponent accepted before a law reports overflow.
pub const MAX_EXPONENT: f64 = 700.0;

/// Uniaxial law `dT/dλ = B·T + C` with `T(1) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialTensileLaw {
    b: f64,
    c: f64,
}

impl ExponentialTensileLaw {
    pub fn new(b: f64, c: f64) -> Result<Self> {
        require_positive("b", b)?;
        require_positive("c", c)?;
        Ok(Self { b, c })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Nominal stress at extension ratio `lambda`.
    pub fn stress(&self, lambda: f64) -> Result<f64> {
        let x = self.exponent(lambda)?;
        Ok(self.c / self.b * x.exp_m1())
    }

    /// `dT/dλ = B·T + C`.
    pub fn slope(&self, lambda: f64) -> Result<f64> {
        Ok(self.b * self.stress(lambda)? + self.c)
    }

    /// Stored energy per unit reference volume, `∫₁^λ T dλ'`.
    pub fn energy_density(&self, lambda: f64) -> Result<f64> {
        let bx = self.exponent(lambda)?;
        let x = lambda - 1.0;
        if bx.abs() < 1e-3 {
            // series of (exp(bx) − 1 − bx)/b² to avoid cancellation
            Ok(self.c * x * x * (0.5 + bx / 6.0 + bx * bx / 24.0 + bx * bx * bx / 120.0))
        } else {
            Ok(self.c / self.b * (bx.exp_m1() / self.b - x))
        }
    }

    fn exponent(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() {
            return Err(Error::Domain(format!("extension ratio must be finite, got {lambda}")));
        }
        if lambda <= 0.0 {
            return Err(Error::Domain(format!("extension ratio must be > 0, got {lambda}")));
        }
        let x = self.b * (lambda - 1.0);
        if x > MAX_EXPONENT {
            return Err(Error::Domain(format!(
                "exponential law overflows at extension ratio {lambda} (B·(λ−1) = {x})"
            )));
        }
        Ok(x)
    }
}

/// Nominal stress of the exponential law.
pub fn tensile_stress(law: &ExponentialTensileLaw, lambda: f64) -> Result<f64> {
    law.stress(lambda)
}

/// Slope `dT/dλ` of the exponential law.
pub fn tensile_slope(law: &ExponentialTensileLaw, lambda: f64) -> Result<f64> {
    law.slope(lambda)
}

/// Green strain along the loading direction of a uniaxial test.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct GreenStrainUniaxial(f64);

impl GreenStrainUniaxial {
    pub fn value(self) -> f64 {
        self.0
    }

    /// The extension ratio that produces this strain.
    pub fn stretch(self) -> f64 {
        (1.0 + 2.0 * self.0).sqrt()
    }
}

/// `E = (λ² − 1)/2`.
pub fn green_strain(lambda: f64) -> Result<GreenStrainUniaxial> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::Domain(format!("extension ratio must be finite and > 0, got {lambda}")));
    }
    Ok(GreenStrainUniaxial(0.5 * (lambda * lambda - 1.0)))
}

/// Second Piola–Kirchhoff stress of a uniaxial specimen, `S = F/(λ·A₀)`.
pub fn uniaxial_pk2_from_load(force: f64, lambda: f64, reference_area: f64) -> Result<f64> {
    require_finite("force", force)?;
    if !(reference_area.is_finite() && reference_area > 0.0) {
        return Err(Error::Domain(format!("reference area must be > 0, got {reference_area}")));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("extension ratio must be > 0, got {lambda}")));
    }
    Ok(force / (lambda * reference_area))
}

/// Parameters of the biaxial Fung strain-energy function.
///
/// `gamma` holds γ₁…γ₅ in order; γ₃ is carried for completeness but does not
/// enter the biaxial energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FungBiaxialParams {
    alpha: [f64; 4],
    a: [f64; 4],
    gamma: [f64; 5],
    c: f64,
    include_quadratic_group: bool,
    include_third_order: bool,
}

impl FungBiaxialParams {
    /// Validates and builds a parameter set.
    ///
    /// Disabled groups are stored as zeros. The exponent's quadratic form
    /// must be positive semidefinite (`a₁, a₂, a₃ ≥ 0`, `a₁a₂ − a₄² ≥ 0`).
    pub fn new(
        alpha: [f64; 4],
        a: [f64; 4],
        gamma: [f64; 5],
        c: f64,
        include_quadratic_group: bool,
        include_third_order: bool,
    ) -> Result<Self> {
        const ALPHA: [&str; 4] = ["alpha1", "alpha2", "alpha3", "alpha4"];
        const A: [&str; 4] = ["a1", "a2", "a3", "a4"];
        const GAMMA: [&str; 5] = ["gamma1", "gamma2", "gamma3", "gamma4", "gamma5"];
        for (name, v) in ALPHA.iter().zip(alpha) {
            require_finite(name, v)?;
        }
        for (name, v) in A.iter().zip(a) {
            require_finite(name, v)?;
        }
        for (name, v) in GAMMA.iter().zip(gamma) {
            require_finite(name, v)?;
        }
        require_non_negative("c", c)?;
        require_non_negative("a1", a[0])?;
        require_non_negative("a2", a[1])?;
        require_non_negative("a3", a[2])?;
        let det = a[0] * a[1] - a[3] * a[3];
        if det < 0.0 {
            return Err(Error::invalid("a4", a[3], format!("exponent form is indefinite: a1·a2 − a4² = {det} < 0")));
        }
        Ok(Self {
            alpha: if include_quadratic_group { alpha } else { [0.0; 4] },
            a,
            gamma: if include_third_order { gamma } else { [0.0; 5] },
            c,
            include_quadratic_group,
            include_third_order,
        })
    }

    /// Exponential group only, no third-order terms.
    pub fn exponential_only(a: [f64; 4], c: f64) -> Result<Self> {
        Self::new([0.0; 4], a, [0.0; 5], c, false, false)
    }

    pub fn alpha(&self) -> [f64; 4] {
        self.alpha
    }

    pub fn a(&self) -> [f64; 4] {
        self.a
    }

    pub fn gamma(&self) -> [f64; 5] {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn include_quadratic_group(&self) -> bool {
        self.include_quadratic_group
    }

    pub fn include_third_order(&self) -> bool {
        self.include_third_order
    }

    fn exponent(&self, e11: f64, e22: f64, e12: f64, e21: f64) -> Result<f64> {
        let [a1, a2, a3, a4] = self.a;
        let [g1, g2, _, g4, g5] = self.gamma;
        let q = a1 * e11 * e11
            + a2 * e22 * e22
            + a3 * e12 * e12
            + a3 * e21 * e21
            + 2.0 * a4 * e11 * e22
            + g1 * e11 * e11 * e11
            + g2 * e22 * e22 * e22
            + g4 * e11 * e11 * e22
            + g5 * e11 * e22 * e22;
        if !q.is_finite() || q > MAX_EXPONENT {
            return Err(Error::Domain(format!("Fung exponent overflows: Q = {q}")));
        }
        Ok(q)
    }

    /// Energy density with the two shear slots treated independently.
    ///
    /// The stresses returned by [`fung_stress`] are the partial derivatives
    /// of this function; `S₁₂` is the derivative with respect to the `e12`
    /// slot alone.
    pub fn energy_density(&self, e11: f64, e22: f64, e12: f64, e21: f64) -> Result<f64> {
        let [al1, al2, al3, al4] = self.alpha;
        let quadratic =
            0.5 * (al1 * e11 * e11 + al2 * e22 * e22 + al3 * e12 * e12 + al3 * e21 * e21 + 2.0 * al4 * e11 * e22);
        let q = self.exponent(e11, e22, e12, e21)?;
        Ok(quadratic + 0.5 * self.c * q.exp())
    }
}

/// Symmetric biaxial Green strain state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiaxialStrainState {
    pub e11: f64,
    pub e22: f64,
    /// Shear component; `E₂₁ = E₁₂`.
    pub e12: f64,
}

impl BiaxialStrainState {
    pub fn new(e11: f64, e22: f64, e12: f64) -> Self {
        Self { e11, e22, e12 }
    }

    pub fn e21(&self) -> f64 {
        self.e12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiaxialStressState {
    pub s11: f64,
    pub s22: f64,
    pub s12: f64,
}

/// Strain-energy density `ρ₀W` at a symmetric strain state.
pub fn fung_energy(params: &FungBiaxialParams, strain: &BiaxialStrainState) -> Result<f64> {
    params.energy_density(strain.e11, strain.e22, strain.e12, strain.e12)
}

/// Second Piola–Kirchhoff stresses `S = ∂ρ₀W/∂E`.
///
/// With `X = exp(Q)` and `A₁ = ½∂Q/∂E₁₁`, `A₂ = ½∂Q/∂E₂₂`:
///
/// ```text
/// S₁₁ = α₁E₁₁ + α₄E₂₂ + c·A₁·X
/// S₂₂ = α₄E₁₁ + α₂E₂₂ + c·A₂·X
/// S₁₂ = α₃E₁₂ + c·a₃·E₁₂·X
/// ```
pub fn fung_stress(params: &FungBiaxialParams, strain: &BiaxialStrainState) -> Result<BiaxialStressState> {
    let (e11, e22, e12) = (strain.e11, strain.e22, strain.e12);
    let [al1, al2, al3, al4] = params.alpha;
    let [a1, a2, a3, a4] = params.a;
    let [g1, g2, _, g4, g5] = params.gamma;
    let x = params.exponent(e11, e22, e12, e12)?.exp();
    let a_1 = a1 * e11 + a4 * e22 + 0.5 * (3.0 * g1 * e11 * e11 + 2.0 * g4 * e11 * e22 + g5 * e22 * e22);
    let a_2 = a4 * e11 + a2 * e22 + 0.5 * (3.0 * g2 * e22 * e22 + g4 * e11 * e11 + 2.0 * g5 * e11 * e22);
    let c = params.c;
    Ok(BiaxialStressState {
        s11: al1 * e11 + al4 * e22 + c * a_1 * x,
        s22: al4 * e11 + al2 * e22 + c * a_2 * x,
        s12: al3 * e12 + c * a3 * e12 * x,
    })
}

/// Which strain coordinate a law or a history is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrainMeasure {
    /// Extension ratio λ; the strain axis of reports is `λ − 1`.
    Stretch,
    /// Green strain `E = (λ² − 1)/2`.
    GreenStrain,
}

impl StrainMeasure {
    pub fn to_stretch(self, value: f64) -> f64 {
        match self {
            StrainMeasure::Stretch => value,
            StrainMeasure::GreenStrain => (1.0 + 2.0 * value).sqrt(),
        }
    }

    /// Value of this measure at extension ratio `lambda`.
    pub fn from_stretch(self, lambda: f64) -> f64 {
        match self {
            StrainMeasure::Stretch => lambda,
            StrainMeasure::GreenStrain => 0.5 * (lambda * lambda - 1.0),
        }
    }

    /// Strain used on report axes: `λ − 1` for stretch, `E` for Green strain.
    pub fn axis_strain(self, lambda: f64) -> f64 {
        match self {
            StrainMeasure::Stretch => lambda - 1.0,
            StrainMeasure::GreenStrain => 0.5 * (lambda * lambda - 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StrainMeasure::Stretch => "stretch_minus_one",
            StrainMeasure::GreenStrain => "green_strain",
        }
    }
}

/// Instantaneous (elastic) uniaxial response `T^(e)` used by the
/// viscoelastic evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElasticLaw {
    /// `T = k·(λ − 1)`.
    Linear {
        modulus: f64,
    },
    Exponential(ExponentialTensileLaw),
    /// Fung law under uniaxial strain `E₁₁ = E`, `E₂₂ = E₁₂ = 0`, reported
    /// as nominal stress `T = λ·S₁₁`.
    Fung(FungBiaxialParams),
}

impl ElasticLaw {
    pub fn linear(modulus: f64) -> Result<Self> {
        require_positive("modulus", modulus)?;
        Ok(ElasticLaw::Linear { modulus })
    }

    pub fn exponential(b: f64, c: f64) -> Result<Self> {
        Ok(ElasticLaw::Exponential(ExponentialTensileLaw::new(b, c)?))
    }

    /// The strain coordinate reports use for this law.
    pub fn natural_measure(&self) -> StrainMeasure {
        match self {
            ElasticLaw::Linear { .. } | ElasticLaw::Exponential(_) => StrainMeasure::Stretch,
            ElasticLaw::Fung(_) => StrainMeasure::GreenStrain,
        }
    }

    /// Nominal stress at extension ratio `lambda`.
    pub fn stress(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Domain(format!("extension ratio must be finite and > 0, got {lambda}")));
        }
        match self {
            ElasticLaw::Linear { modulus } => Ok(modulus * (lambda - 1.0)),
            ElasticLaw::Exponential(law) => law.stress(lambda),
            ElasticLaw::Fung(p) => {
                let e = 0.5 * (lambda * lambda - 1.0);
                let s = fung_stress(p, &BiaxialStrainState::new(e, 0.0, 0.0))?;
                Ok(lambda * s.s11)
            }
        }
    }

    /// `dT/dλ`.
    pub fn tangent(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Domain(format!("extension ratio must be finite and > 0, got {lambda}")));
        }
        match self {
            ElasticLaw::Linear { modulus } => Ok(*modulus),
            ElasticLaw::Exponential(law) => law.slope(lambda),
            ElasticLaw::Fung(p) => {
                let e = 0.5 * (lambda * lambda - 1.0);
                let [al1, _, _, _] = p.alpha;
                let [a1, _, _, _] = p.a;
                let g1 = p.gamma[0];
                let x = p.exponent(e, 0.0, 0.0, 0.0)?.exp();
                let a_1 = a1 * e + 1.5 * g1 * e * e;
                let da_1 = a1 + 3.0 * g1 * e;
                let s11 = al1 * e + p.c * a_1 * x;
                let ds11 = al1 + p.c * x * (da_1 + 2.0 * a_1 * a_1);
                Ok(s11 + lambda * lambda * ds11)
            }
        }
    }

    /// Stored energy per unit reference volume, `∫₁^λ T dλ'`.
    pub fn energy_density(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Domain(format!("extension ratio must be finite and > 0, got {lambda}")));
        }
        match self {
            ElasticLaw::Linear { modulus } => Ok(0.5 * modulus * (lambda - 1.0) * (lambda - 1.0)),
            ElasticLaw::Exponential(law) => law.energy_density(lambda),
            ElasticLaw::Fung(p) => {
                // T dλ = S dE, so the uniaxial energy is W(E) − W(0)
                let e = 0.5 * (lambda * lambda - 1.0);
                Ok(p.energy_density(e, 0.0, 0.0, 0.0)? - p.energy_density(0.0, 0.0, 0.0, 0.0)?)
            }
        }
    }

    /// Inverts `T(λ) = target` by bisection followed by safeguarded Newton,
    /// starting from the bracket `[0.5·λ₀, 1.5·λ₀]` (widened if needed).
    pub fn invert(&self, target: f64, lambda0: f64) -> Result<f64> {
        require_finite("target", target)?;
        if target == 0.0 {
            // every law is stress-free in the reference configuration
            return Ok(1.0);
        }
        let f = |l: f64| self.stress(l).map(|t| t - target);
        let start = if lambda0.is_finite() && lambda0 > 0.0 { lambda0 } else { 1.0 };
        let mut lo = 0.5 * start;
        let mut hi = 1.5 * start;
        let mut f_lo = f(lo)?;
        let mut f_hi = f(hi)?;
        let mut widen = 0;
        while f_lo > 0.0 {
            lo *= 0.5;
            f_lo = f(lo)?;
            widen += 1;
            if widen > 60 {
                return Err(Error::Domain(format!("cannot bracket stretch for stress {target}")));
            }
        }
        while f_hi < 0.0 {
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            f_hi = f(hi)?;
            widen += 1;
            if widen > 60 {
                return Err(Error::Domain(format!("cannot bracket stretch for stress {target}")));
            }
        }
        if f_lo == 0.0 {
            return Ok(lo);
        }
        if f_hi == 0.0 {
            return Ok(hi);
        }
        // a few bisections to land in the Newton basin
        for _ in 0..8 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid)?;
            if fm == 0.0 {
                return Ok(mid);
            }
            if fm < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fx = f(x)?;
            if fx == 0.0 {
                return Ok(x);
            }
            if fx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = self.tangent(x)?;
            let mut next = if d > 0.0 { x - fx / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() || hi - lo <= 4.0 * f64::EPSILON * x.abs() {
                return Ok(next);
            }
            x = next;
        }
        Err(Error::Domain(format!("stretch inversion did not converge for stress {target}")))
    }
}
