//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use tissue_qlv::constitutive::StrainMeasure;
use tissue_qlv::constitutive::{fung_stress, BiaxialStrainState, ElasticLaw, ExponentialTensileLaw, FungBiaxialParams};
use tissue_qlv::kernels::{
    fung_reduced_relaxation, fung_reduced_relaxation_quadrature, kelvin_creep, kelvin_relaxation, maxwell_relaxation,
    voigt_creep, FungSpectrum, KelvinParams, MaxwellParams, PronySpectrum, ReducedRelaxation, VoigtParams,
};
use tissue_qlv::network::{simulate, stability_check, SpringMassSystem, Stability, SystemState};
use tissue_qlv::protocols::{
    fit_exponential_law, fit_relaxation_spectrum_with_frequencies, hysteresis_sweep, log_space, run_creep,
    run_relaxation, CreepSpec, CyclicSpec, RelaxationSpec, Sampling,
};
use tissue_qlv::qlv::{
    max_relative_deviation, qlv_stress_direct_with, qlv_stress_fast, DirectKernel, QlvModel, StrainHistory,
};

type Check = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Check);

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// `points_per_decade` log-spaced times on `[lo, hi]`.
fn decade_grid(lo: f64, hi: f64, points_per_decade: usize) -> Vec<f64> {
    let n = ((hi / lo).log10() * points_per_decade as f64).ceil() as usize + 1;
    log_space(lo, hi, n.max(2)).unwrap()
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

// --- 1 ------------------------------------------------------------------

fn random_kernel(family: usize, rng: &mut ChaCha8Rng) -> ReducedRelaxation {
    match family {
        0 => ReducedRelaxation::maxwell(
            &MaxwellParams::new(log_uniform(rng, 0.1, 10.0), log_uniform(rng, 0.01, 100.0)).unwrap(),
        ),
        1 => ReducedRelaxation::voigt(
            &VoigtParams::new(log_uniform(rng, 0.1, 10.0), log_uniform(rng, 0.01, 100.0)).unwrap(),
        ),
        2 => {
            let tau_eps = log_uniform(rng, 0.01, 100.0);
            let tau_sigma = tau_eps * (1.0 + log_uniform(rng, 1e-3, 100.0));
            ReducedRelaxation::kelvin(&KelvinParams::new(log_uniform(rng, 0.1, 10.0), tau_eps, tau_sigma).unwrap())
        }
        3 => {
            let n = rng.random_range(1..=8);
            let terms: Vec<(f64, f64)> =
                (0..n).map(|_| (rng.random_range(0.0..1.0), log_uniform(rng, 1e-3, 1e3))).collect();
            let s = PronySpectrum::new(rng.random_range(0.0..1.0), terms).unwrap();
            ReducedRelaxation::prony(&s).unwrap()
        }
        _ => {
            let q1 = log_uniform(rng, 1e-3, 1.0);
            let s = FungSpectrum::new(log_uniform(rng, 0.01, 10.0), q1, q1 * log_uniform(rng, 3.0, 1e5)).unwrap();
            ReducedRelaxation::fung(s)
        }
    }
}

fn criterion_1() -> Check {
    const NAMES: [&str; 5] = ["maxwell", "voigt", "kelvin", "prony", "fung"];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_origin: f64 = 0.0;
    let mut worst_rise: f64 = 0.0;
    let mut failures = Vec::new();
    for (family, name) in NAMES.iter().enumerate() {
        // the closed-form branch switch in the continuous spectrum leaves
        // rounding-level steps
        let slack = if family == 4 { 1e-15 } else { 0.0 };
        for _ in 0..1000 {
            let g = random_kernel(family, &mut rng);
            let origin = (g.value(0.0).map_err(e)? - 1.0).abs();
            worst_origin = worst_origin.max(origin);
            let (tmin, tmax) = g.time_range().unwrap();
            let grid = decade_grid(1e-3 * tmin, 1e3 * tmax, 200);
            let values = grid.iter().map(|&t| g.value(t)).collect::<Result<Vec<_>, _>>().map_err(e)?;
            let rise = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
            worst_rise = worst_rise.max(rise);
            if origin > 1e-12 || rise > slack {
                failures.push(*name);
            }
        }
    }
    failures.dedup();
    let detail = format!(
        "5 families x 1000 draws, max |G(0)-1| = {worst_origin:.1e}, max step up = {worst_rise:.1e}{}",
        if failures.is_empty() { String::new() } else { format!(", failing: {failures:?}") }
    );
    Ok((failures.is_empty(), detail))
}

// --- 2 ------------------------------------------------------------------

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let q1 = log_uniform(&mut rng, 1e-3, 1.0);
        let s =
            FungSpectrum::new(log_uniform(&mut rng, 0.01, 10.0), q1, q1 * log_uniform(&mut rng, 10.0, 1e5)).unwrap();
        for t in log_space(1e-2 * s.q1(), 1e2 * s.q2(), 50).map_err(e)? {
            let closed = fung_reduced_relaxation(&s, t).map_err(e)?;
            let quad = fung_reduced_relaxation_quadrature(&s, t).map_err(e)?;
            worst = worst.max(((closed - quad) / quad).abs());
        }
    }
    Ok((worst <= 1e-8, format!("20 spectra x 50 times, max rel err = {worst:.2e} (<= 1e-8)")))
}

// --- 3 ------------------------------------------------------------------

fn smooth_history(rng: &mut ChaCha8Rng, n: usize) -> StrainHistory {
    let modes: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (rng.random_range(0.005..0.03), 2.0 * PI * rng.random_range(0.2..3.0), rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    let ramp = rng.random_range(0.02..0.1);
    StrainHistory::uniform(1.0 / (n - 1) as f64, n, StrainMeasure::Stretch, |t| {
        1.0 + ramp * t + modes.iter().map(|(a, w, p)| a * ((w * t + p).sin() - p.sin())).sum::<f64>()
    })
    .unwrap()
}

fn random_fung_model(rng: &mut ChaCha8Rng) -> QlvModel {
    let s = FungSpectrum::new(log_uniform(rng, 0.1, 2.0), log_uniform(rng, 0.1, 1.0), log_uniform(rng, 10.0, 1000.0))
        .unwrap();
    let law = ElasticLaw::exponential(log_uniform(rng, 0.5, 10.0), log_uniform(rng, 0.5, 5.0)).unwrap();
    QlvModel::new(law, ReducedRelaxation::fung(s), 64).unwrap()
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let model = random_fung_model(&mut rng);
        let h = smooth_history(&mut rng, 2048);
        let fast = qlv_stress_fast(&model, &h).map_err(e)?;
        let direct = qlv_stress_direct_with(&model, &h, DirectKernel::Prony).map_err(e)?;
        worst = worst.max(max_relative_deviation(&fast.values, &direct.values));
    }
    let model = random_fung_model(&mut rng);
    let h = smooth_history(&mut rng, 16384);
    let time = |f: &dyn Fn()| {
        let mut best = Duration::MAX;
        for _ in 0..3 {
            let start = Instant::now();
            f();
            best = best.min(start.elapsed());
        }
        best
    };
    let t_fast = time(&|| {
        qlv_stress_fast(&model, &h).unwrap();
    });
    let t_direct = time(&|| {
        qlv_stress_direct_with(&model, &h, DirectKernel::Prony).unwrap();
    });
    let speedup = t_direct.as_secs_f64() / t_fast.as_secs_f64();
    Ok((
        worst <= 1e-6 && speedup >= 20.0,
        format!(
            "100 histories N=2048, max rel dev = {worst:.2e} (<= 1e-6); speedup at N=16384 = {speedup:.0}x (>= 20x)"
        ),
    ))
}

// --- 4 ------------------------------------------------------------------

fn criterion_4() -> Check {
    let law = ElasticLaw::exponential(2.0, 3.0).unwrap();
    let kernels: Vec<(&str, ReducedRelaxation)> = vec![
        ("maxwell", ReducedRelaxation::maxwell(&MaxwellParams::new(2.0, 3.0).unwrap())),
        ("voigt", ReducedRelaxation::voigt(&VoigtParams::new(2.0, 3.0).unwrap())),
        ("kelvin", ReducedRelaxation::kelvin(&KelvinParams::new(1.0, 0.5, 2.0).unwrap())),
        (
            "prony",
            ReducedRelaxation::prony(&PronySpectrum::new(0.3, [(0.2, 0.5), (0.4, 5.0), (0.1, 50.0)]).unwrap()).unwrap(),
        ),
        ("fung", ReducedRelaxation::fung(FungSpectrum::new(0.5, 0.01, 100.0).unwrap())),
    ];
    let lambda0 = 1.15;
    let te0 = law.stress(lambda0).map_err(e)?;
    let h = StrainHistory::uniform(0.01, 1001, StrainMeasure::Stretch, |_| lambda0).map_err(e)?;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, g) in kernels {
        let model = QlvModel::new(law, g.clone(), 64).map_err(e)?;
        let mut runs = vec![qlv_stress_direct_with(&model, &h, DirectKernel::Exact).map_err(e)?.values];
        if g.is_discrete() {
            runs.push(qlv_stress_fast(&model, &h).map_err(e)?.values);
        }
        let spec = RelaxationSpec { stretch: lambda0, sampling: Sampling::new(10.0, 0.01, 1).map_err(e)? };
        runs.push(run_relaxation(&spec, &model).map_err(e)?.series.stress);
        let mut dev: f64 = 0.0;
        for stress in &runs {
            for (&t, &s) in h.times().iter().zip(stress) {
                dev = dev.max((s / te0 - g.value(t).map_err(e)?).abs());
            }
        }
        parts.push(format!("{name} {dev:.0e}"));
        worst = worst.max(dev);
    }
    Ok((worst <= 1e-10, format!("max |T/T0 - G| per kernel: {} (<= 1e-10)", parts.join(", "))))
}

// --- 5 ------------------------------------------------------------------

fn sweep(model: &QlvModel, frequencies: &[f64]) -> Result<Vec<f64>, String> {
    let points = hysteresis_sweep(&CyclicSpec::new(0.05, 1.0), model, frequencies).map_err(e)?;
    Ok(points.iter().map(|p| p.hysteresis).collect())
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let law = ElasticLaw::linear(1.0).unwrap();
    let model = |g: ReducedRelaxation| QlvModel::new(law, g, 64).map_err(e);
    let strictly = |h: &[f64], up: bool| h.windows(2).all(|w| if up { w[1] > w[0] } else { w[1] < w[0] });

    let freqs = log_space(0.1, 10.0, 9).map_err(e)?;
    let maxwell = sweep(&model(ReducedRelaxation::maxwell(&MaxwellParams::new(1.0, 1.0).unwrap()))?, &freqs)?;
    let voigt = sweep(&model(ReducedRelaxation::voigt(&VoigtParams::new(1.0, 1.0).unwrap()))?, &freqs)?;
    let kelvin_freqs = log_space(0.01, 100.0, 13).map_err(e)?;
    let kelvin = sweep(&model(ReducedRelaxation::kelvin(&KelvinParams::new(1.0, 1.0, 4.0).unwrap()))?, &kelvin_freqs)?;
    // spectrum on [1e-2, 1e2]; interior two decades of frequency
    let fung = sweep(&model(ReducedRelaxation::fung(FungSpectrum::new(0.5, 0.01, 100.0).unwrap()))?, &freqs)?;

    let peak = kelvin.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|p| p.0).unwrap();
    let bell = peak > 0 && peak < kelvin.len() - 1;
    let fmax = fung.iter().copied().fold(f64::MIN, f64::max);
    let fmin = fung.iter().copied().fold(f64::MAX, f64::min);
    let flat = fmax / fmin;
    let elapsed = start.elapsed().as_secs_f64();
    let results = [
        ("maxwell decreasing", strictly(&maxwell, false)),
        ("voigt increasing", strictly(&voigt, true)),
        ("kelvin interior max", bell),
        ("fung flat", flat <= 1.10),
        ("runtime", elapsed <= 60.0),
    ];
    let failed: Vec<&str> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    let span = |h: &[f64]| format!("{:.3}..{:.3}", h[0], h[h.len() - 1]);
    Ok((
        failed.is_empty(),
        format!(
            "maxwell H {} , voigt H {}, kelvin peak at w = {:.3}, fung max/min = {flat:.4} (<= 1.10), {elapsed:.1}s{}",
            span(&maxwell),
            span(&voigt),
            kelvin_freqs[peak],
            if failed.is_empty() { String::new() } else { format!("; failing: {failed:?}") }
        ),
    ))
}

// --- 6 ------------------------------------------------------------------

fn criterion_6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let tau_eps = log_uniform(&mut rng, 1e-3, 1e3);
        let tau_sigma = tau_eps * (1.0 + log_uniform(&mut rng, 1e-3, 1e3));
        let p = KelvinParams::new(log_uniform(&mut rng, 1e-2, 1e2), tau_eps, tau_sigma).unwrap();
        let (early, late) = (1e-300, 800.0 * tau_sigma);
        let products = [
            p.instantaneous_modulus() * p.instantaneous_compliance(),
            p.relaxed_modulus() * p.relaxed_compliance(),
            kelvin_relaxation(&p, early) * kelvin_creep(&p, early),
            kelvin_relaxation(&p, late) * kelvin_creep(&p, late),
        ];
        for x in products {
            worst = worst.max((x - 1.0).abs());
        }
    }
    Ok((worst <= 1e-12, format!("1000 draws, max |g c - 1| at 0+ and inf = {worst:.1e} (<= 1e-12)")))
}

// --- 7 ------------------------------------------------------------------

/// `max|a − b| / max|b|` against a closed form, taking the right limit at
/// the step instant (closed forms use H(0) = 1/2).
fn curve_error(t: &[f64], a: &[f64], exact: impl Fn(f64) -> f64) -> f64 {
    let reference: Vec<f64> = t.iter().map(|&t| exact(t.max(f64::MIN_POSITIVE))).collect();
    max_relative_deviation(a, &reference)
}

fn criterion_7() -> Check {
    let voigt = VoigtParams::new(2.0, 2.0).unwrap();
    let tau = voigt.retardation_time();
    let creep_model =
        QlvModel::new(ElasticLaw::linear(voigt.mu()).unwrap(), ReducedRelaxation::voigt(&voigt), 0).map_err(e)?;
    let creep_error = |dt: f64| -> Result<f64, String> {
        let spec = CreepSpec { stress: 1.0, sampling: Sampling::new(5.0 * tau, dt, 1).map_err(e)? };
        let out = run_creep(&spec, &creep_model).map_err(e)?;
        Ok(curve_error(&out.series.time, &out.series.strain, |t| voigt_creep(&voigt, t)))
    };
    let (c1, c2) = (creep_error(tau / 1000.0)?, creep_error(tau / 2000.0)?);

    let maxwell = MaxwellParams::new(2.0, 2.0).unwrap();
    let mtau = maxwell.relaxation_time();
    let relax_model =
        QlvModel::new(ElasticLaw::linear(maxwell.mu()).unwrap(), ReducedRelaxation::maxwell(&maxwell), 0).map_err(e)?;
    // stress is G(t)·T^(e) exactly, so the grid enters through the rate
    let relax_error = |dt: f64| -> Result<(f64, f64), String> {
        let spec = RelaxationSpec { stretch: 2.0, sampling: Sampling::new(5.0 * mtau, dt, 1).map_err(e)? };
        let out = run_relaxation(&spec, &relax_model).map_err(e)?;
        let t = &out.series.time;
        let stress = curve_error(t, &out.series.stress, |t| maxwell_relaxation(&maxwell, t));
        let rates: Vec<f64> = out.report.relaxation_rate.iter().map(|r| r.1).collect();
        let rate = curve_error(t, &rates, |t| -maxwell_relaxation(&maxwell, t) / mtau);
        Ok((stress, rate))
    };
    let ((s1, r1), (s2, r2)) = (relax_error(mtau / 1000.0)?, relax_error(mtau / 2000.0)?);
    let creep_order = (c1 / c2).log2();
    let rate_order = (r1 / r2).log2();
    let pass = c1 <= 1e-4 && c2 <= 1e-4 && s1 <= 1e-4 && r1 <= 1e-4 && creep_order >= 1.8 && rate_order >= 1.8;
    Ok((
        pass,
        format!(
            "voigt creep err {c1:.2e} -> {c2:.2e} (order {creep_order:.2}); maxwell relaxation err {s1:.1e}/{s2:.1e}, rate err {r1:.2e} -> {r2:.2e} (order {rate_order:.2})"
        ),
    ))
}

// --- 8 ------------------------------------------------------------------

fn chain3() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0])
}

fn criterion_8() -> Check {
    let sys = SpringMassSystem::new(vec![1.0, 2.0, 0.5], chain3()).map_err(e)?;
    let dt = sys.shortest_period().map_err(e)? / 100.0;
    let init = SystemState::new(&sys, DVector::from_vec(vec![0.3, -0.1, 0.2]), DVector::from_vec(vec![0.0, 0.1, 0.0]))
        .map_err(e)?;
    let steps = 100_000;
    let sim = simulate(&sys, &init, steps as f64 * dt, dt, 1).map_err(e)?;
    let energy: Vec<f64> = sim.samples.iter().map(|s| s.energy.mechanical()).collect();
    let e0 = energy[0];
    // secular drift: least-squares trend of the energy over the run; the
    // bounded O((ω dt)²) oscillation of the discrete energy is reported
    // separately
    let n = energy.len() as f64;
    let mean_k = (n - 1.0) / 2.0;
    let mean_e = energy.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &en) in energy.iter().enumerate() {
        sxy += (k as f64 - mean_k) * (en - mean_e);
        sxx += (k as f64 - mean_k).powi(2);
    }
    let drift = (sxy / sxx * (n - 1.0) / e0).abs();
    let oscillation = energy.iter().map(|en| ((en - e0) / e0).abs()).fold(0.0, f64::max);

    let beta = DMatrix::from_row_slice(3, 3, &[0.2, -0.05, 0.0, -0.05, 0.2, -0.05, 0.0, -0.05, 0.1]);
    let damped = SpringMassSystem::new(vec![1.0, 2.0, 0.5], chain3()).map_err(e)?.with_damping(beta).map_err(e)?;
    let init = SystemState::new(&damped, init.q.clone(), init.v.clone()).map_err(e)?;
    let sim = simulate(&damped, &init, 20_000.0 * dt, dt, 10).map_err(e)?;
    let rises = sim.samples.windows(2).filter(|w| w[1].energy.mechanical() > w[0].energy.mechanical()).count();
    Ok((
        drift <= 1e-5 && rises == 0,
        format!(
            "1e5 steps at T_min/100: secular drift {drift:.1e} (<= 1e-5), pointwise max {oscillation:.1e}; damped: {rises} increases over {} samples",
            sim.samples.len()
        ),
    ))
}

// --- 9 ------------------------------------------------------------------

fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut wrong = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let k = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
        if stability_check(&k).map_err(e)? != Stability::Stable {
            wrong += 1;
        }
    }
    for _ in 0..100 {
        // K = L D Lᵀ: leading minor j is d₁⋯dⱼ, first negative at `planted`
        let n = rng.random_range(1..=8);
        let planted = rng.random_range(1..=n);
        let l = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => rng.random_range(-1.0..1.0),
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => 0.0,
        });
        let d = DVector::from_fn(n, |i, _| {
            let m = rng.random_range(0.5..2.0);
            if i + 1 == planted {
                -m
            } else {
                m
            }
        });
        let k = &l * DMatrix::from_diagonal(&d) * l.transpose();
        let k = 0.5 * (&k + k.transpose());
        match stability_check(&k).map_err(e)? {
            Stability::Unstable { minor, .. } if minor == planted => {}
            _ => wrong += 1,
        }
    }
    Ok((wrong == 0, format!("100 SPD + 100 planted, {wrong} misclassified")))
}

// --- 10 -----------------------------------------------------------------

fn criterion_10() -> Check {
    let law = ExponentialTensileLaw::new(2.0, 3.0).unwrap();
    let stretch: Vec<f64> = (0..50).map(|i| 1.0 + i as f64 / 49.0).collect();
    let clean: Vec<f64> = stretch.iter().map(|&l| law.stress(l).unwrap()).collect();
    let rel = |fit: &ExponentialTensileLaw| ((fit.b() - 2.0) / 2.0).abs().max(((fit.c() - 3.0) / 3.0).abs());
    let noiseless = rel(&fit_exponential_law(&stretch, &clean).map_err(e)?.law);

    let normal = Normal::new(0.0, 0.01).unwrap();
    let mut noisy_worst: f64 = 0.0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let noisy: Vec<f64> = clean.iter().map(|&t| t * (1.0 + normal.sample(&mut rng))).collect();
        noisy_worst = noisy_worst.max(rel(&fit_exponential_law(&stretch, &noisy).map_err(e)?.law));
    }

    let truth = PronySpectrum::new(0.25, [(0.2, 0.3), (0.35, 3.0), (0.2, 30.0)]).unwrap();
    let times: Vec<f64> = (0..500).map(|i| i as f64 * 0.02).collect();
    let values: Vec<f64> = times.iter().map(|&t| truth.value(t)).collect();
    let fit = fit_relaxation_spectrum_with_frequencies(&times, &values, &[0.3, 3.0, 30.0]).map_err(e)?;
    let mut amp_err = (fit.spectrum.equilibrium() - truth.equilibrium()).abs();
    for (a, b) in fit.spectrum.terms().iter().zip(truth.terms()) {
        amp_err = amp_err.max((a.amplitude - b.amplitude).abs());
    }
    Ok((
        noiseless <= 1e-3 && noisy_worst <= 0.05 && amp_err <= 1e-6,
        format!(
            "(B, C) rel err noiseless {noiseless:.1e} (<= 1e-3), 1% noise worst of 10 seeds {noisy_worst:.2e} (<= 0.05); prony amplitude err {amp_err:.1e} (<= 1e-6)"
        ),
    ))
}

// --- 11 -----------------------------------------------------------------

fn criterion_11() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
        let alpha = [u(0.0, 1.0), u(0.0, 1.0), u(0.0, 1.0), u(-0.5, 0.5)];
        let (a1, a2) = (u(0.1, 2.0), u(0.1, 2.0));
        let a = [a1, a2, u(0.1, 2.0), u(-0.9, 0.9) * (a1 * a2).sqrt()];
        let gamma = [u(-1.0, 1.0), u(-1.0, 1.0), u(-1.0, 1.0), u(-1.0, 1.0), u(-1.0, 1.0)];
        let p = FungBiaxialParams::new(alpha, a, gamma, u(0.1, 2.0), true, true).map_err(e)?;
        let (e11, e22, e12) = (u(-0.2, 0.3), u(-0.2, 0.3), u(-0.2, 0.2));
        let s = fung_stress(&p, &BiaxialStrainState::new(e11, e22, e12)).map_err(e)?;
        let w = |x: [f64; 4]| p.energy_density(x[0], x[1], x[2], x[3]).unwrap();
        let h = 1e-5;
        let fd = |slot: usize| {
            let mut plus = [e11, e22, e12, e12];
            let mut minus = plus;
            plus[slot] += h;
            minus[slot] -= h;
            (w(plus) - w(minus)) / (2.0 * h)
        };
        let analytic = [s.s11, s.s22, s.s12];
        let numeric = [fd(0), fd(1), fd(2)];
        let scale = analytic.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (x, y) in analytic.iter().zip(numeric) {
            worst = worst.max((x - y).abs() / scale);
        }
    }
    Ok((worst <= 1e-6, format!("1000 draws, max rel err = {worst:.1e} (<= 1e-6)")))
}

// --- 12 -----------------------------------------------------------------

const NOISY_RELAXATION: &str = r#"
[model.elastic]
kind = "exponential"
b = 2.0
c = 3.0

[model.kernel]
kind = "fung"
c = 0.5
q1 = 0.01
q2 = 100.0

[protocol]
kind = "relaxation"
stretch = 1.2
duration = 10.0
dt = 0.01

[output]
stride = 5
noise = 0.01
"#;

const SWEEP: &str = r#"
[model.elastic]
kind = "linear"
modulus = 1.0

[model.kernel]
kind = "kelvin"
e_r = 1.0
tau_eps = 1.0
tau_sigma = 4.0

[protocol]
kind = "cyclic"
amplitude = 0.05

[protocol.sweep]
from = 0.1
to = 10.0
points = 7
"#;

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tissue-qlv")).args(args).output().map_err(e)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn criterion_12() -> Check {
    let dir = tempfile::tempdir().map_err(e)?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    std::fs::write(path("relax.toml"), NOISY_RELAXATION).map_err(e)?;
    std::fs::write(path("sweep.toml"), SWEEP).map_err(e)?;
    type Run<'a> = (&'a str, &'a str, &'a [&'a str]);
    let runs: [Run; 2] = [("relax", "relax.toml", &["--seed", "42"]), ("sweep", "sweep.toml", &[])];
    let mut compared = 0;
    for (command, config, extra) in runs {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let out = path(&format!("{command}{k}.csv"));
            let cfg = path(config);
            let mut args = vec![command, "--config", cfg.as_str(), "--out", out.as_str()];
            args.extend_from_slice(extra);
            cli(&args)?;
            outputs.push(std::fs::read(Path::new(&out)).map_err(e)?);
        }
        if outputs[0] != outputs[1] {
            return Ok((false, format!("`{command}` outputs differ between identical runs")));
        }
        compared += 1;
    }
    // a different seed must change the noisy output, or the seed is unused
    let (a, b) = (path("relax0.csv"), path("relax_other.csv"));
    cli(&["relax", "--config", &path("relax.toml"), "--out", &b, "--seed", "43"])?;
    let seed_matters = std::fs::read(&a).map_err(e)? != std::fs::read(&b).map_err(e)?;
    Ok((
        seed_matters,
        format!("{compared} commands byte-identical across runs (relax with seeded noise, parallel sweep); other seed differs: {seed_matters}"),
    ))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("normalization", criterion_1),
        ("closed form vs quadrature", criterion_2),
        ("fast vs direct oracle", criterion_3),
        ("step-response factorization", criterion_4),
        ("hysteresis shapes", criterion_5),
        ("kelvin reciprocity", criterion_6),
        ("creep/relaxation analytic match", criterion_7),
        ("network energy", criterion_8),
        ("stability screening", criterion_9),
        ("fit round-trips", criterion_10),
        ("gradient checks", criterion_11),
        ("cli determinism", criterion_12),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|err| (false, format!("error: {err}")));
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
