//! Uniaxial exponential law: stress, tangent and stored energy over a
//! stretch range, and recovering a stretch from a stress.

use tissue_qlv::constitutive::{tensile_slope, tensile_stress, ExponentialTensileLaw};

fn main() -> tissue_qlv::Result<()> {
    let law = ExponentialTensileLaw::new(2.0, 3.0)?;
    println!("{:>8} {:>12} {:>12} {:>12}", "lambda", "T", "dT/dlambda", "W");
    for i in 0..=10 {
        let lambda = 1.0 + 0.05 * i as f64;
        println!(
            "{lambda:>8.3} {:>12.6} {:>12.6} {:>12.6}",
            tensile_stress(&law, lambda)?,
            tensile_slope(&law, lambda)?,
            law.energy_density(lambda)?
        );
    }

    // the tangent is affine in the stress: dT/dλ = B·T + C
    let t = tensile_stress(&law, 1.3)?;
    println!("B*T + C at 1.3 = {:.6}", law.b() * t + law.c());

    let elastic = tissue_qlv::constitutive::ElasticLaw::Exponential(law);
    let lambda = elastic.invert(1.0, 1.0)?;
    println!("stretch carrying T = 1: {lambda:.9}");
    Ok(())
}
