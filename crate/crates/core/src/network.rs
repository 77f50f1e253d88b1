//! Viscoelastic spring-mass systems.
//!
//! Equations of motion for generalized coordinates `q`:
//!
//! ```text
//! M·q̈ + Σⱼ ∫ G_ij(t − τ)·q̇ⱼ(τ) dτ + β·q̇ = Σⱼ ∫ A_ij(t − τ)·q̇ⱼ(τ) dτ + F^(e)(t)
//! ```
//!
//! Entries without a memory kernel are plain springs (`G_ij ≡ K_ij`).
//! Time integration is velocity-Verlet with an implicit velocity half-step
//! for the damping term; convolution terms are carried as per-term
//! internal variables with the exact exponential recursion. The system is
//! quiescent before `t = 0`, so an initial displacement acts as a step.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, LU};

use crate::constitutive::ExponentialTensileLaw;
use crate::error::{require_positive, Error, Result};
use crate::kernels::PronySpectrum;

/// A relaxation kernel attached to one matrix entry:
/// `G_ij(t) = scale·g(t)` with `g` a Prony spectrum.
///
/// The signed `scale` lets off-diagonal couplings carry negative
/// coefficients while the spectrum itself keeps non-negative amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEntry {
    pub row: usize,
    pub col: usize,
    pub scale: f64,
    pub spectrum: PronySpectrum,
}

impl KernelEntry {
    pub fn new(row: usize, col: usize, scale: f64, spectrum: PronySpectrum) -> Result<Self> {
        if !scale.is_finite() {
            return Err(Error::invalid("scale", scale, "must be finite"));
        }
        Ok(Self { row, col, scale, spectrum })
    }

    pub fn value(&self, t: f64) -> f64 {
        self.scale * self.spectrum.value(t)
    }

    pub fn equilibrium(&self) -> f64 {
        self.scale * self.spectrum.equilibrium()
    }

    pub fn initial(&self) -> f64 {
        self.scale * self.spectrum.initial()
    }
}

/// Other end of a nonlinear spring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Dof(usize),
    Ground,
}

/// Connection whose force follows the exponential tensile law applied to
/// the connection stretch `λ = 1 + (qᵢ − qⱼ)/L₀`, optionally with a reduced
/// relaxation kernel (QLV superposition).
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearSpring {
    pub dof: usize,
    pub anchor: Anchor,
    pub law: ExponentialTensileLaw,
    pub rest_length: f64,
    pub area: f64,
    /// Normalized so that `G(0) = 1`; `None` means purely elastic.
    kernel: Option<PronySpectrum>,
}

impl NonlinearSpring {
    pub fn new(
        dof: usize,
        anchor: Anchor,
        law: ExponentialTensileLaw,
        rest_length: f64,
        area: f64,
        kernel: Option<&PronySpectrum>,
    ) -> Result<Self> {
        require_positive("rest_length", rest_length)?;
        require_positive("area", area)?;
        let kernel = kernel.map(|k| k.normalized()).transpose()?;
        Ok(Self { dof, anchor, law, rest_length, area, kernel })
    }

    pub fn kernel(&self) -> Option<&PronySpectrum> {
        self.kernel.as_ref()
    }

    fn equilibrium_factor(&self) -> f64 {
        self.kernel.as_ref().map_or(1.0, |k| k.equilibrium())
    }

    fn stretch(&self, q: &DVector<f64>) -> f64 {
        let other = match self.anchor {
            Anchor::Dof(j) => q[j],
            Anchor::Ground => 0.0,
        };
        1.0 + (q[self.dof] - other) / self.rest_length
    }
}

/// Time-dependent generalized force.
#[derive(Debug, Clone, PartialEq)]
pub enum ForceSchedule {
    Constant(f64),
    /// `value` for `t ≥ time`, zero before.
    Step {
        time: f64,
        value: f64,
    },
    /// `amplitude·sin(frequency·t + phase)`, `frequency` in rad per time unit.
    Sine {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// Piecewise-linear through `(time, value)` points, held constant
    /// outside the table.
    Table(Vec<(f64, f64)>),
}

impl ForceSchedule {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            ForceSchedule::Constant(v) => *v,
            ForceSchedule::Step { time, value } => {
                if t >= *time {
                    *value
                } else {
                    0.0
                }
            }
            ForceSchedule::Sine { amplitude, frequency, phase } => amplitude * (frequency * t + phase).sin(),
            ForceSchedule::Table(points) => {
                if points.is_empty() {
                    return 0.0;
                }
                if t <= points[0].0 {
                    return points[0].1;
                }
                let last = points[points.len() - 1];
                if t >= last.0 {
                    return last.1;
                }
                let k = points.partition_point(|p| p.0 <= t);
                let (t0, v0) = points[k - 1];
                let (t1, v1) = points[k];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ForceSchedule::Constant(v) => finite("force", *v),
            ForceSchedule::Step { time, value } => {
                finite("force step time", *time)?;
                finite("force", *value)
            }
            ForceSchedule::Sine { amplitude, frequency, phase } => {
                finite("force amplitude", *amplitude)?;
                finite("force frequency", *frequency)?;
                finite("force phase", *phase)
            }
            ForceSchedule::Table(points) => {
                for (k, p) in points.iter().enumerate() {
                    finite("force table time", p.0)?;
                    finite("force table value", p.1)?;
                    if k > 0 && !(p.0 > points[k - 1].0) {
                        return Err(Error::Domain("force table times must be strictly increasing".into()));
                    }
                }
                Ok(())
            }
        }
    }
}

fn finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be finite, got {v}")))
    }
}

/// Whether the damping matrix acts when memory kernels are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DampingMode {
    /// Memory kernels, when present, replace `β`.
    #[default]
    KernelsReplace,
    /// `β` and memory kernels act together.
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpringMassSystem {
    masses: DVector<f64>,
    stiffness: DMatrix<f64>,
    damping: DMatrix<f64>,
    damping_mode: DampingMode,
    memory: Vec<KernelEntry>,
    aero: Vec<KernelEntry>,
    springs: Vec<NonlinearSpring>,
    forces: Vec<(usize, ForceSchedule)>,
}

impl SpringMassSystem {
    /// Masses must be positive and `K` square, matching and symmetric to
    /// `1e-12` (relative to its largest entry).
    pub fn new(masses: Vec<f64>, stiffness: DMatrix<f64>) -> Result<Self> {
        let n = masses.len();
        if n == 0 {
            return Err(Error::Domain("a system needs at least one degree of freedom".into()));
        }
        for &m in &masses {
            require_positive("mass", m)?;
        }
        if stiffness.nrows() != n || stiffness.ncols() != n {
            return Err(Error::Domain(format!(
                "stiffness matrix is {}x{}, expected {n}x{n}",
                stiffness.nrows(),
                stiffness.ncols()
            )));
        }
        check_matrix("stiffness", &stiffness, true)?;
        Ok(Self {
            masses: DVector::from_vec(masses),
            stiffness,
            damping: DMatrix::zeros(n, n),
            damping_mode: DampingMode::default(),
            memory: Vec::new(),
            aero: Vec::new(),
            springs: Vec::new(),
            forces: Vec::new(),
        })
    }

    pub fn dofs(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &DVector<f64> {
        &self.masses
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn damping(&self) -> &DMatrix<f64> {
        &self.damping
    }

    pub fn memory(&self) -> &[KernelEntry] {
        &self.memory
    }

    pub fn aero(&self) -> &[KernelEntry] {
        &self.aero
    }

    pub fn springs(&self) -> &[NonlinearSpring] {
        &self.springs
    }

    pub fn forces(&self) -> &[(usize, ForceSchedule)] {
        &self.forces
    }

    pub fn damping_mode(&self) -> DampingMode {
        self.damping_mode
    }

    pub fn with_damping(mut self, beta: DMatrix<f64>) -> Result<Self> {
        let n = self.dofs();
        if beta.nrows() != n || beta.ncols() != n {
            return Err(Error::Domain(format!("damping matrix must be {n}x{n}")));
        }
        check_matrix("damping", &beta, false)?;
        self.damping = beta;
        Ok(self)
    }

    pub fn with_damping_mode(mut self, mode: DampingMode) -> Self {
        self.damping_mode = mode;
        self
    }

    /// Adds a memory kernel; its equilibrium value must equal `K_ij`.
    pub fn add_memory(mut self, entry: KernelEntry) -> Result<Self> {
        self.check_index(entry.row)?;
        self.check_index(entry.col)?;
        let k = self.stiffness[(entry.row, entry.col)];
        let scale = self.stiffness.amax().max(f64::MIN_POSITIVE);
        if (entry.equilibrium() - k).abs() > 1e-12 * scale.max(k.abs()) {
            return Err(Error::Domain(format!(
                "memory kernel ({}, {}) has equilibrium {} but K = {k}",
                entry.row + 1,
                entry.col + 1,
                entry.equilibrium()
            )));
        }
        if self.memory.iter().any(|e| e.row == entry.row && e.col == entry.col) {
            return Err(Error::Domain(format!(
                "duplicate memory kernel for entry ({}, {})",
                entry.row + 1,
                entry.col + 1
            )));
        }
        self.memory.push(entry);
        Ok(self)
    }

    /// Adds an aerodynamic influence kernel (no symmetry requirement).
    pub fn add_aero(mut self, entry: KernelEntry) -> Result<Self> {
        self.check_index(entry.row)?;
        self.check_index(entry.col)?;
        self.aero.push(entry);
        Ok(self)
    }

    pub fn add_spring(mut self, spring: NonlinearSpring) -> Result<Self> {
        self.check_index(spring.dof)?;
        if let Anchor::Dof(j) = spring.anchor {
            self.check_index(j)?;
            if j == spring.dof {
                return Err(Error::Domain("a spring cannot connect a coordinate to itself".into()));
            }
        }
        self.springs.push(spring);
        Ok(self)
    }

    pub fn add_force(mut self, dof: usize, schedule: ForceSchedule) -> Result<Self> {
        self.check_index(dof)?;
        schedule.validate()?;
        self.forces.push((dof, schedule));
        Ok(self)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.dofs() {
            Ok(())
        } else {
            Err(Error::Domain(format!("coordinate index {i} out of range for {} degrees of freedom", self.dofs())))
        }
    }

    fn damping_active(&self) -> bool {
        let has_damping = self.damping.iter().any(|&b| b != 0.0);
        has_damping && (self.memory.is_empty() || self.damping_mode == DampingMode::Both)
    }

    /// Instantaneous stiffness `G(0)` (memory kernels at `t = 0` and spring
    /// tangents at `q`), symmetrized.
    pub fn instantaneous_stiffness(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut k = self.stiffness.clone();
        for e in &self.memory {
            k[(e.row, e.col)] += e.initial() - e.equilibrium();
        }
        for s in &self.springs {
            let slope = s.law.slope(s.stretch(q))? * s.area / s.rest_length;
            k[(s.dof, s.dof)] += slope;
            if let Anchor::Dof(j) = s.anchor {
                k[(j, j)] += slope;
                k[(s.dof, j)] -= slope;
                k[(j, s.dof)] -= slope;
            }
        }
        Ok(0.5 * (&k + k.transpose()))
    }

    /// Largest natural frequency of `(M, K)` for the given stiffness.
    pub fn max_frequency(&self, k: &DMatrix<f64>) -> f64 {
        let inv_sqrt: DVector<f64> = self.masses.map(|m| 1.0 / m.sqrt());
        let n = self.dofs();
        let scaled = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * k[(i, j)] * inv_sqrt[j]);
        let eig = SymmetricEigen::new(scaled);
        eig.eigenvalues.max().max(0.0).sqrt()
    }

    /// Explicit-scheme limit `2/ω_max` at displacement `q`.
    pub fn stability_limit(&self, q: &DVector<f64>) -> Result<f64> {
        let w = self.max_frequency(&self.instantaneous_stiffness(q)?);
        Ok(if w > 0.0 { 2.0 / w } else { f64::INFINITY })
    }

    /// Period of the fastest mode of the instantaneous stiffness at rest.
    pub fn shortest_period(&self) -> Result<f64> {
        let w = self.max_frequency(&self.instantaneous_stiffness(&DVector::zeros(self.dofs()))?);
        Ok(if w > 0.0 { 2.0 * std::f64::consts::PI / w } else { f64::INFINITY })
    }

    fn external_force(&self, t: f64, out: &mut DVector<f64>) {
        out.fill(0.0);
        for (dof, schedule) in &self.forces {
            out[*dof] += schedule.value(t);
        }
    }
}

fn check_matrix(name: &str, m: &DMatrix<f64>, symmetric: bool) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{name} matrix has non-finite entries")));
    }
    if symmetric {
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let asym = (m - m.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::Domain(format!("{name} matrix is not symmetric (max |K − Kᵀ| = {asym:e})")));
        }
    }
    Ok(())
}

/// Outcome of the leading-principal-minor test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stability {
    Stable,
    /// First leading minor (1-based) that is not positive, with its value.
    Unstable {
        minor: usize,
        value: f64,
    },
}

impl Stability {
    pub fn is_stable(&self) -> bool {
        matches!(self, Stability::Stable)
    }
}

/// Tests that every leading principal minor of `K` exceeds `1e-12·max|K|`.
///
/// Minors come from Gaussian elimination without pivoting: the k-th pivot
/// is the ratio of consecutive minors, so the first non-positive pivot
/// marks the first non-positive minor.
pub fn stability_check(k: &DMatrix<f64>) -> Result<Stability> {
    if k.nrows() != k.ncols() {
        return Err(Error::Domain(format!("matrix must be square, got {}x{}", k.nrows(), k.ncols())));
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let n = k.nrows();
    let scale = k.amax();
    let tol = 1e-12 * scale;
    let mut a = k.clone();
    let mut minor = 1.0;
    for p in 0..n {
        let pivot = a[(p, p)];
        minor *= pivot;
        if !(pivot > tol) || scale == 0.0 {
            return Ok(Stability::Unstable { minor: p + 1, value: minor });
        }
        for r in p + 1..n {
            let f = a[(r, p)] / pivot;
            if f != 0.0 {
                for c in p..n {
                    a[(r, c)] -= f * a[(p, c)];
                }
            }
        }
    }
    Ok(Stability::Stable)
}

/// `C = K⁻¹` by Cholesky factorization.
pub fn flexibility_from_stiffness(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Stability::Unstable { minor, value } = stability_check(k)? {
        return Err(Error::Unstable { minor, value });
    }
    check_matrix("stiffness", k, true)?;
    let sym = 0.5 * (k + k.transpose());
    let chol = Cholesky::new(sym).ok_or(Error::Unstable { minor: k.nrows(), value: 0.0 })?;
    let c = chol.inverse();
    Ok(0.5 * (&c + c.transpose()))
}

/// `𝒰 = ½·qᵀKq`.
pub fn elastic_energy(k: &DMatrix<f64>, q: &DVector<f64>) -> Result<f64> {
    if k.nrows() != q.len() || k.ncols() != q.len() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {}x{} matrix with {} coordinates",
            k.nrows(),
            k.ncols(),
            q.len()
        )));
    }
    Ok(0.5 * q.dot(&(k * q)))
}

/// `𝒰 = ½·QᵀCQ` in terms of generalized forces.
pub fn elastic_energy_from_forces(c: &DMatrix<f64>, forces: &DVector<f64>) -> Result<f64> {
    elastic_energy(c, forces)
}

/// Energy bookkeeping at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyReport {
    pub time: f64,
    /// `½·Σ mᵢq̇ᵢ²`.
    pub kinetic: f64,
    /// `½·qᵀKq` plus the equilibrium energy of nonlinear springs.
    pub elastic: f64,
    /// Work done by external and aerodynamic forces since `t = 0`.
    pub external_work: f64,
    /// Work absorbed by damping and by the transient part of memory kernels.
    pub dissipation: f64,
}

impl EnergyReport {
    pub fn mechanical(&self) -> f64 {
        self.kinetic + self.elastic
    }

    /// `𝒦 + 𝒰 + dissipation − 𝒲`, constant for an exact trajectory.
    pub fn balance(&self) -> f64 {
        self.kinetic + self.elastic + self.dissipation - self.external_work
    }
}

/// Displacements, velocities and convolution internal variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub time: f64,
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    memory: Vec<Vec<f64>>,
    aero: Vec<Vec<f64>>,
    springs: Vec<SpringState>,
    work: f64,
    dissipation: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct SpringState {
    te: f64,
    h: Vec<f64>,
}

impl SystemState {
    /// At rest in the reference configuration.
    pub fn at_rest(system: &SpringMassSystem) -> Self {
        let n = system.dofs();
        Self::new(system, DVector::zeros(n), DVector::zeros(n)).expect("rest state is valid")
    }

    /// Initial displacement and velocity at `t = 0`, reached from a quiescent
    /// past; kernels see the displacement as a step at the origin.
    pub fn new(system: &SpringMassSystem, q: DVector<f64>, v: DVector<f64>) -> Result<Self> {
        let n = system.dofs();
        if q.len() != n || v.len() != n {
            return Err(Error::Domain(format!("initial state must have {n} coordinates")));
        }
        if q.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Domain("initial state must be finite".into()));
        }
        let step = |entries: &[KernelEntry]| -> Vec<Vec<f64>> {
            entries.iter().map(|e| e.spectrum.terms().iter().map(|t| t.amplitude * q[e.col]).collect()).collect()
        };
        let memory = step(&system.memory);
        let aero = step(&system.aero);
        let springs = system
            .springs
            .iter()
            .map(|s| {
                let te = s.law.stress(s.stretch(&q))?;
                let h =
                    s.kernel.as_ref().map(|k| k.terms().iter().map(|t| t.amplitude * te).collect()).unwrap_or_default();
                Ok(SpringState { te, h })
            })
            .collect::<Result<_>>()?;
        Ok(Self { time: 0.0, q, v, memory, aero, springs, work: 0.0, dissipation: 0.0 })
    }

    /// Number of internal variables per memory kernel entry.
    pub fn memory_sizes(&self) -> Vec<usize> {
        self.memory.iter().map(Vec::len).collect()
    }
}

/// Force components needed by a step and by the energy accounting.
struct Forces {
    /// Elastic restoring force: `K·q` plus spring equilibrium forces.
    elastic: DVector<f64>,
    /// Transient part of memory kernels and springs.
    memory: DVector<f64>,
    /// External plus aerodynamic generalized force.
    applied: DVector<f64>,
}

/// Fixed-step velocity-Verlet integrator for one system.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    system: &'a SpringMassSystem,
    dt: f64,
    damping: bool,
    /// Factorization of `M + dt/2·β` when damping acts.
    lhs: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    memory_decay: Vec<Vec<(f64, f64)>>,
    aero_decay: Vec<Vec<(f64, f64)>>,
    spring_decay: Vec<Vec<(f64, f64)>>,
}

fn decay_table(spectrum: &PronySpectrum, dt: f64) -> Vec<(f64, f64)> {
    spectrum
        .terms()
        .iter()
        .map(|t| {
            let x = t.frequency * dt;
            let phi = if x < 1e-8 { 1.0 - 0.5 * x } else { -(-x).exp_m1() / x };
            ((-x).exp(), t.amplitude * phi)
        })
        .collect()
}

impl<'a> Integrator<'a> {
    /// Fails with a configuration error when `dt` is not below `2/ω_max`
    /// of the instantaneous stiffness at `q0`.
    pub fn new(system: &'a SpringMassSystem, dt: f64, q0: &DVector<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Configuration(format!("time step must be > 0, got {dt}")));
        }
        let limit = system.stability_limit(q0)?;
        if dt >= limit {
            return Err(Error::Configuration(format!(
                "time step {dt} violates the explicit stability bound dt < 2/ω_max = {limit}"
            )));
        }
        let damping = system.damping_active();
        let lhs = damping.then(|| {
            let m = DMatrix::from_diagonal(&system.masses);
            LU::new(m + &system.damping * (0.5 * dt))
        });
        Ok(Self {
            system,
            dt,
            damping,
            lhs,
            memory_decay: system.memory.iter().map(|e| decay_table(&e.spectrum, dt)).collect(),
            aero_decay: system.aero.iter().map(|e| decay_table(&e.spectrum, dt)).collect(),
            spring_decay: system
                .springs
                .iter()
                .map(|s| s.kernel.as_ref().map(|k| decay_table(k, dt)).unwrap_or_default())
                .collect(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn forces(&self, state: &SystemState) -> Forces {
        let sys = self.system;
        let n = sys.dofs();
        let mut elastic = &sys.stiffness * &state.q;
        let mut memory = DVector::zeros(n);
        for (e, h) in sys.memory.iter().zip(&state.memory) {
            memory[e.row] += e.scale * h.iter().sum::<f64>();
        }
        for (s, st) in sys.springs.iter().zip(&state.springs) {
            let eq = s.area * s.equilibrium_factor() * st.te;
            let tr = s.area * st.h.iter().sum::<f64>();
            elastic[s.dof] += eq;
            memory[s.dof] += tr;
            if let Anchor::Dof(j) = s.anchor {
                elastic[j] -= eq;
                memory[j] -= tr;
            }
        }
        let mut applied = DVector::zeros(n);
        sys.external_force(state.time, &mut applied);
        for (e, h) in sys.aero.iter().zip(&state.aero) {
            applied[e.row] += e.scale * (e.spectrum.equilibrium() * state.q[e.col] + h.iter().sum::<f64>());
        }
        Forces { elastic, memory, applied }
    }

    fn residual(&self, f: &Forces) -> DVector<f64> {
        &f.applied - &f.elastic - &f.memory
    }

    fn acceleration(&self, state: &SystemState, f: &Forces) -> DVector<f64> {
        let mut r = self.residual(f);
        if self.damping {
            r -= &self.system.damping * &state.v;
        }
        r.component_div(&self.system.masses)
    }

    /// Advances `state` by one step.
    pub fn step(&self, state: &mut SystemState) -> Result<()> {
        let sys = self.system;
        let dt = self.dt;
        let f0 = self.forces(state);
        let a0 = self.acceleration(state, &f0);
        let v_half = &state.v + &a0 * (0.5 * dt);
        let dq = &v_half * dt;
        let q_new = &state.q + &dq;

        for ((e, h), table) in sys.memory.iter().zip(&mut state.memory).zip(&self.memory_decay) {
            let d = dq[e.col];
            for (hn, &(decay, w)) in h.iter_mut().zip(table) {
                *hn = decay * *hn + w * d;
            }
        }
        for ((e, h), table) in sys.aero.iter().zip(&mut state.aero).zip(&self.aero_decay) {
            let d = dq[e.col];
            for (hn, &(decay, w)) in h.iter_mut().zip(table) {
                *hn = decay * *hn + w * d;
            }
        }
        for ((s, st), table) in sys.springs.iter().zip(&mut state.springs).zip(&self.spring_decay) {
            let lambda = s.stretch(&q_new);
            let te = s.law.stress(lambda).map_err(|e| Error::Numerical {
                step: (state.time / dt).round() as usize + 1,
                reason: format!("nonlinear spring on coordinate {}: {e}", s.dof),
            })?;
            let d = te - st.te;
            for (hn, &(decay, w)) in st.h.iter_mut().zip(table) {
                *hn = decay * *hn + w * d;
            }
            st.te = te;
        }

        let old_q = std::mem::replace(&mut state.q, q_new);
        let old_v = state.v.clone();
        state.time += dt;
        let f1 = self.forces(state);
        let r1 = self.residual(&f1);
        let v_new = match &self.lhs {
            Some(lu) => {
                let m_vhalf = v_half.component_mul(&sys.masses);
                let rhs = m_vhalf + &r1 * (0.5 * dt);
                lu.solve(&rhs).ok_or_else(|| Error::Numerical {
                    step: (state.time / dt).round() as usize,
                    reason: "singular damping system".into(),
                })?
            }
            None => &v_half + r1.component_div(&sys.masses) * (0.5 * dt),
        };
        state.v = v_new;

        // trapezoidal work over the displacement increment
        let delta = &state.q - &old_q;
        state.work += 0.5 * (&f0.applied + &f1.applied).dot(&delta);
        let mut absorbed = 0.5 * (&f0.memory + &f1.memory).dot(&delta);
        if self.damping {
            absorbed += 0.5 * (&sys.damping * &old_v + &sys.damping * &state.v).dot(&delta);
        }
        state.dissipation += absorbed;

        if state.q.iter().chain(state.v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Numerical {
                step: (state.time / dt).round() as usize,
                reason: "state is no longer finite".into(),
            });
        }
        Ok(())
    }

    pub fn energy(&self, state: &SystemState) -> Result<EnergyReport> {
        energy_report(self.system, state)
    }
}

/// Energy terms of `state`.
pub fn energy_report(system: &SpringMassSystem, state: &SystemState) -> Result<EnergyReport> {
    let kinetic = 0.5 * state.v.component_mul(&state.v).dot(&system.masses);
    let mut elastic = elastic_energy(&system.stiffness, &state.q)?;
    for s in &system.springs {
        let lambda = s.stretch(&state.q);
        elastic += s.area * s.rest_length * s.equilibrium_factor() * s.law.energy_density(lambda)?;
    }
    Ok(EnergyReport { time: state.time, kinetic, elastic, external_work: state.work, dissipation: state.dissipation })
}

/// Advances a copy of `state` by one step of `dt`.
pub fn step(system: &SpringMassSystem, state: &SystemState, dt: f64) -> Result<SystemState> {
    let integrator = Integrator::new(system, dt, &state.q)?;
    let mut next = state.clone();
    integrator.step(&mut next)?;
    Ok(next)
}

/// One recorded instant of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub energy: EnergyReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub samples: Vec<Sample>,
    pub final_state: SystemState,
    pub final_energy: EnergyReport,
    pub steps: usize,
}

/// Number of fixed steps covering `duration`.
pub fn step_count(duration: f64, dt: f64) -> usize {
    (duration / dt + 1e-9).floor() as usize
}

/// Runs `floor(duration/dt)` steps, recording every `stride`-th state
/// (the initial state is always recorded).
pub fn simulate(
    system: &SpringMassSystem,
    initial: &SystemState,
    duration: f64,
    dt: f64,
    stride: usize,
) -> Result<Simulation> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::Configuration(format!("duration must be >= 0, got {duration}")));
    }
    if stride == 0 {
        return Err(Error::Configuration("recording stride must be >= 1".into()));
    }
    let integrator = Integrator::new(system, dt, &initial.q)?;
    let steps = step_count(duration, dt);
    let mut state = initial.clone();
    let record = |s: &SystemState| -> Result<Sample> {
        Ok(Sample { time: s.time, q: s.q.clone(), v: s.v.clone(), energy: energy_report(system, s)? })
    };
    let mut samples = Vec::with_capacity(steps / stride + 1);
    samples.push(record(&state)?);
    for k in 1..=steps {
        integrator.step(&mut state)?;
        // keep sample times on the grid rather than accumulating rounding
        state.time = k as f64 * dt;
        if k % stride == 0 {
            samples.push(record(&state)?);
        }
    }
    let final_energy = energy_report(system, &state)?;
    Ok(Simulation { samples, final_state: state, final_energy, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn chain3(k: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[2.0 * k, -k, 0.0, -k, 2.0 * k, -k, 0.0, -k, k])
    }

    #[test]
    fn flexibility_examples() {
        let c = flexibility_from_stiffness(&DMatrix::identity(3, 3)).unwrap();
        assert!((c - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
        let c = flexibility_from_stiffness(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]))).unwrap();
        assert!((c[(0, 0)] - 0.5).abs() < 1e-15 && (c[(1, 1)] - 0.25).abs() < 1e-15);
        let err = flexibility_from_stiffness(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::Unstable { minor: 2, .. }));
    }

    #[test]
    fn stability_examples() {
        assert_eq!(stability_check(&DMatrix::identity(2, 2)).unwrap(), Stability::Stable);
        match stability_check(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap() {
            Stability::Unstable { minor, value } => {
                assert_eq!(minor, 2);
                assert!((value + 3.0).abs() < 1e-12);
            }
            s => panic!("{s:?}"),
        }
        assert!(matches!(
            stability_check(&DMatrix::from_row_slice(1, 1, &[-1.0])).unwrap(),
            Stability::Unstable { minor: 1, .. }
        ));
        assert!(stability_check(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn energy_examples() {
        let k = DMatrix::from_row_slice(1, 1, &[2.0]);
        assert_eq!(elastic_energy(&k, &DVector::from_vec(vec![0.0])).unwrap(), 0.0);
        assert_eq!(elastic_energy(&k, &DVector::from_vec(vec![3.0])).unwrap(), 9.0);
        assert!(elastic_energy(&k, &DVector::from_vec(vec![1.0, 2.0])).is_err());
        let k = chain3(3.0);
        let q = DVector::from_vec(vec![0.3, -0.2, 0.9]);
        let c = flexibility_from_stiffness(&k).unwrap();
        let dual = elastic_energy_from_forces(&c, &(&k * &q)).unwrap();
        assert!((dual - elastic_energy(&k, &q).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn harmonic_oscillator_tracks_cosine() {
        let (k, m) = (4.0, 1.0);
        let sys = SpringMassSystem::new(vec![m], DMatrix::from_element(1, 1, k)).unwrap();
        let omega = (k / m).sqrt();
        let period = 2.0 * PI / omega;
        let dt = period / 1000.0;
        let init = SystemState::new(&sys, DVector::from_element(1, 1.0), DVector::zeros(1)).unwrap();
        let sim = simulate(&sys, &init, 10.0 * period, dt, 1).unwrap();
        let err = sim.samples.iter().map(|s| (s.q[0] - (omega * s.time).cos()).abs()).fold(0.0, f64::max);
        // velocity-Verlet lags by ω³dt²/24 per unit time: 2π·10·(ω·dt)²/24 ≈ 1.03e-4 here
        let phase = 2.0 * PI * 10.0 * (omega * dt).powi(2) / 24.0;
        assert!((err - phase).abs() < 0.05 * phase, "{err} vs {phase}");
        let coarse = simulate(&sys, &init, 10.0 * period, 2.0 * dt, 1).unwrap();
        let err2 = coarse.samples.iter().map(|s| (s.q[0] - (omega * s.time).cos()).abs()).fold(0.0, f64::max);
        assert!((err2 / err - 4.0).abs() < 0.05);
    }

    #[test]
    fn zero_forces_stay_at_rest() {
        let sys = SpringMassSystem::new(vec![1.0, 2.0, 1.0], chain3(5.0)).unwrap();
        let sim = simulate(&sys, &SystemState::at_rest(&sys), 5.0, 0.01, 10).unwrap();
        assert!(sim.samples.iter().all(|s| s.q.iter().all(|&x| x == 0.0) && s.v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn zero_duration_returns_initial_state() {
        let sys = SpringMassSystem::new(vec![1.0], DMatrix::from_element(1, 1, 1.0)).unwrap();
        let init = SystemState::new(&sys, DVector::from_element(1, 0.5), DVector::zeros(1)).unwrap();
        let sim = simulate(&sys, &init, 0.0, 0.01, 1).unwrap();
        assert_eq!(sim.samples.len(), 1);
        assert_eq!(sim.final_state, init);
    }

    #[test]
    fn unstable_step_is_rejected() {
        let sys = SpringMassSystem::new(vec![1.0], DMatrix::from_element(1, 1, 100.0)).unwrap();
        let err = step(&sys, &SystemState::at_rest(&sys), 0.5).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)), "{err}");
    }

    #[test]
    fn maxwell_reaction_follows_relaxation() {
        // K = 0 equilibrium, one Maxwell term μ·exp(−t·μ/η); a huge mass keeps q ≈ 1
        let (mu, eta) = (3.0, 6.0);
        let spectrum = PronySpectrum::new(0.0, [(mu, mu / eta)]).unwrap();
        let sys = SpringMassSystem::new(vec![1e12], DMatrix::zeros(1, 1))
            .unwrap()
            .add_memory(KernelEntry::new(0, 0, 1.0, spectrum).unwrap())
            .unwrap();
        let init = SystemState::new(&sys, DVector::from_element(1, 1.0), DVector::zeros(1)).unwrap();
        let integ = Integrator::new(&sys, 0.01, &init.q).unwrap();
        let mut state = init;
        for _ in 0..500 {
            integ.step(&mut state).unwrap();
            let reaction = integ.forces(&state).memory[0] / state.q[0];
            let g = mu * (-mu * state.time / eta).exp();
            assert!(((reaction - g) / g).abs() < 1e-4, "t = {}", state.time);
        }
    }

    #[test]
    fn empty_kernels_match_plain_matrices() {
        let k = chain3(2.0);
        let beta = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.2, 0.1]));
        let plain = SpringMassSystem::new(vec![1.0, 1.0, 1.0], k.clone()).unwrap().with_damping(beta.clone()).unwrap();
        // constant kernels carry no transient terms and reproduce K exactly
        let mut with_kernels = SpringMassSystem::new(vec![1.0, 1.0, 1.0], k.clone())
            .unwrap()
            .with_damping(beta)
            .unwrap()
            .with_damping_mode(DampingMode::Both);
        for i in 0..3 {
            for j in 0..3 {
                if k[(i, j)] != 0.0 {
                    let e = KernelEntry::new(i, j, k[(i, j)], PronySpectrum::constant(1.0).unwrap()).unwrap();
                    with_kernels = with_kernels.add_memory(e).unwrap();
                }
            }
        }
        let q0 = DVector::from_vec(vec![0.1, 0.0, -0.2]);
        let a =
            simulate(&plain, &SystemState::new(&plain, q0.clone(), DVector::zeros(3)).unwrap(), 3.0, 0.01, 1).unwrap();
        let b = simulate(&with_kernels, &SystemState::new(&with_kernels, q0, DVector::zeros(3)).unwrap(), 3.0, 0.01, 1)
            .unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((&x.q - &y.q).amax() < 1e-14);
            assert!((&x.v - &y.v).amax() < 1e-14);
        }
    }

    #[test]
    fn memory_requires_consistent_equilibrium() {
        let sys = SpringMassSystem::new(vec![1.0], DMatrix::from_element(1, 1, 2.0)).unwrap();
        let bad = KernelEntry::new(0, 0, 1.0, PronySpectrum::new(1.0, [(1.0, 1.0)]).unwrap()).unwrap();
        assert!(sys.add_memory(bad).is_err());
    }

    #[test]
    fn asymmetric_stiffness_is_rejected() {
        let k = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 2.0]);
        assert!(SpringMassSystem::new(vec![1.0, 1.0], k).is_err());
    }

    #[test]
    fn force_schedules() {
        assert_eq!(ForceSchedule::Step { time: 1.0, value: 2.0 }.value(0.5), 0.0);
        assert_eq!(ForceSchedule::Step { time: 1.0, value: 2.0 }.value(1.0), 2.0);
        let t = ForceSchedule::Table(vec![(0.0, 0.0), (2.0, 4.0)]);
        assert_eq!(t.value(1.0), 2.0);
        assert_eq!(t.value(5.0), 4.0);
        let s = ForceSchedule::Sine { amplitude: 2.0, frequency: PI, phase: 0.0 };
        assert!((s.value(0.5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn nonlinear_spring_energy_is_conserved() {
        let law = ExponentialTensileLaw::new(2.0, 10.0).unwrap();
        let spring = NonlinearSpring::new(0, Anchor::Ground, law, 1.0, 1.0, None).unwrap();
        let sys = SpringMassSystem::new(vec![1.0], DMatrix::zeros(1, 1)).unwrap().add_spring(spring).unwrap();
        let init = SystemState::new(&sys, DVector::zeros(1), DVector::from_element(1, 1.0)).unwrap();
        let dt = sys.shortest_period().unwrap() / 2000.0;
        let sim = simulate(&sys, &init, 20.0, dt, 100).unwrap();
        let e0 = sim.samples[0].energy.mechanical();
        for s in &sim.samples {
            assert!((s.energy.mechanical() - e0).abs() / e0 < 1e-4);
        }
    }
}
