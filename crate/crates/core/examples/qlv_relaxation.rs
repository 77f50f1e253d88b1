//! Quasi-linear viscoelastic response to a ramp-and-hold stretch, from
//! the fast recursive evaluator and the direct convolution.

use tissue_qlv::constitutive::{ElasticLaw, StrainMeasure};
use tissue_qlv::kernels::{FungSpectrum, ReducedRelaxation};
use tissue_qlv::qlv::{
    max_relative_deviation, qlv_stress_direct_with, qlv_stress_fast, DirectKernel, QlvModel, StrainHistory,
};

fn main() -> tissue_qlv::Result<()> {
    let model = QlvModel::new(
        ElasticLaw::exponential(5.0, 1.0)?,
        ReducedRelaxation::fung(FungSpectrum::new(0.3, 0.05, 50.0)?),
        64,
    )?;
    // ramp to λ = 1.15 over one second, then hold
    let history = StrainHistory::uniform(0.01, 3001, StrainMeasure::Stretch, |t| 1.0 + 0.15 * t.min(1.0))?;

    let fast = qlv_stress_fast(&model, &history)?;
    let direct = qlv_stress_direct_with(&model, &history, DirectKernel::Prony)?;
    let exact = qlv_stress_direct_with(&model, &history, DirectKernel::Exact)?;

    println!("{:>6} {:>12} {:>12}", "t", "fast", "exact kernel");
    for i in (0..history.len()).step_by(300) {
        println!("{:>6.1} {:>12.6} {:>12.6}", history.times()[i], fast.values[i], exact.values[i]);
    }
    println!("fast vs direct (same Prony kernel): {:.2e}", max_relative_deviation(&fast.values, &direct.values));
    println!("Prony kernel vs exact kernel: {:.2e}", max_relative_deviation(&direct.values, &exact.values));
    Ok(())
}
