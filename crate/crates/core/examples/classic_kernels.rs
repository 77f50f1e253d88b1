//! Maxwell, Voigt and Kelvin elements: creep and relaxation functions and
//! the Kelvin reciprocity at the start and end of the response.

use tissue_qlv::kernels::{
    kelvin_creep, kelvin_relaxation, maxwell_creep, maxwell_relaxation, voigt_creep, KelvinParams, MaxwellParams,
    VoigtParams,
};

fn main() -> tissue_qlv::Result<()> {
    let maxwell = MaxwellParams::new(2.0, 4.0)?;
    let voigt = VoigtParams::new(2.0, 4.0)?;
    let kelvin = KelvinParams::new(1.0, 0.5, 2.0)?;

    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}", "t", "c_max", "k_max", "c_voigt", "c_kelvin", "k_kelvin");
    for t in [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        println!(
            "{t:>6} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            maxwell_creep(&maxwell, t),
            maxwell_relaxation(&maxwell, t),
            voigt_creep(&voigt, t),
            kelvin_creep(&kelvin, t),
            kelvin_relaxation(&kelvin, t)
        );
    }

    println!(
        "kelvin: instantaneous modulus {} x compliance {} = {}",
        kelvin.instantaneous_modulus(),
        kelvin.instantaneous_compliance(),
        kelvin.instantaneous_modulus() * kelvin.instantaneous_compliance()
    );
    println!(
        "kelvin: relaxed modulus {} x compliance {} = {}",
        kelvin.relaxed_modulus(),
        kelvin.relaxed_compliance(),
        kelvin.relaxed_modulus() * kelvin.relaxed_compliance()
    );
    Ok(())
}
