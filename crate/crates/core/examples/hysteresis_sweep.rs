//! Hysteresis ratio against drive frequency for Voigt, Kelvin and Fung
//! relaxation under a sinusoidal stretch.

use tissue_qlv::constitutive::ElasticLaw;
use tissue_qlv::kernels::{FungSpectrum, KelvinParams, ReducedRelaxation, VoigtParams};
use tissue_qlv::protocols::{hysteresis_sweep, log_space, CyclicSpec};
use tissue_qlv::qlv::QlvModel;

fn main() -> tissue_qlv::Result<()> {
    let frequencies = log_space(0.01, 100.0, 13)?;
    let kernels = [
        ("voigt", ReducedRelaxation::voigt(&VoigtParams::new(1.0, 1.0)?)),
        ("kelvin", ReducedRelaxation::kelvin(&KelvinParams::new(1.0, 1.0, 4.0)?)),
        ("fung", ReducedRelaxation::fung(FungSpectrum::new(0.5, 0.01, 100.0)?)),
    ];
    let base = CyclicSpec::new(0.05, 1.0);

    print!("{:>10}", "omega");
    let mut columns = Vec::new();
    for (name, kernel) in kernels {
        print!(" {name:>8}");
        let model = QlvModel::new(ElasticLaw::linear(1.0)?, kernel, 64)?;
        columns.push(hysteresis_sweep(&base, &model, &frequencies)?);
    }
    println!();
    for (i, w) in frequencies.iter().enumerate() {
        print!("{w:>10.4}");
        for c in &columns {
            print!(" {:>8.4}", c[i].hysteresis);
        }
        println!();
    }
    Ok(())
}
