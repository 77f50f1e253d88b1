//! Fitting the exponential law to noisy stress-stretch data and a Prony
//! spectrum to a sampled relaxation curve.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tissue_qlv::constitutive::ExponentialTensileLaw;
use tissue_qlv::kernels::PronySpectrum;
use tissue_qlv::protocols::{fit_exponential_law, fit_relaxation_spectrum};

fn main() -> tissue_qlv::Result<()> {
    let truth = ExponentialTensileLaw::new(4.0, 0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let stretch: Vec<f64> = (0..60).map(|i| 1.0 + i as f64 * 0.005).collect();
    let stress: Vec<f64> = stretch
        .iter()
        .map(|&l| Ok(truth.stress(l)? * (1.0 + rng.random_range(-0.01..0.01))))
        .collect::<tissue_qlv::Result<_>>()?;
    let fit = fit_exponential_law(&stretch, &stress)?;
    println!(
        "exponential law: B = {:.4}, C = {:.4} (start {:.4}, {:.4}; {} iterations, residual {:.2e})",
        fit.law.b(),
        fit.law.c(),
        fit.initial.0,
        fit.initial.1,
        fit.iterations,
        fit.residual_norm
    );

    let relaxation = PronySpectrum::new(0.3, [(0.4, 5.0), (0.3, 0.2)])?;
    let times: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
    let values: Vec<f64> = times.iter().map(|&t| relaxation.value(t)).collect();
    let fit = fit_relaxation_spectrum(&times, &values, 40)?;
    println!("relaxation spectrum: equilibrium {:.4}, max error {:.2e}", fit.spectrum.equilibrium(), fit.max_error);
    for term in fit.spectrum.terms().iter().filter(|t| t.amplitude > 1e-4) {
        println!("  amplitude {:.4} at frequency {:.4}", term.amplitude, term.frequency);
    }
    Ok(())
}
