//! Biaxial Fung strain energy: second Piola-Kirchhoff stresses under an
//! equibiaxial stretch path, with a finite-difference check of S11.

use tissue_qlv::constitutive::{fung_energy, fung_stress, green_strain, BiaxialStrainState, FungBiaxialParams};

fn main() -> tissue_qlv::Result<()> {
    let params = FungBiaxialParams::new([10.0, 8.0, 3.0, 1.0], [1.2, 0.9, 0.4, 0.2], [0.0; 5], 2.0, true, false)?;

    println!("{:>7} {:>10} {:>12} {:>12} {:>12}", "lambda", "E", "W", "S11", "S22");
    for i in 0..=8 {
        let lambda = 1.0 + 0.025 * i as f64;
        let e = green_strain(lambda)?.value();
        let strain = BiaxialStrainState::new(e, e, 0.0);
        let s = fung_stress(&params, &strain)?;
        println!("{lambda:>7.3} {e:>10.5} {:>12.5} {:>12.5} {:>12.5}", fung_energy(&params, &strain)?, s.s11, s.s22);
    }

    let strain = BiaxialStrainState::new(0.1, 0.05, 0.02);
    let h = 1e-6;
    let w = |e11: f64| fung_energy(&params, &BiaxialStrainState::new(e11, 0.05, 0.02));
    let fd = (w(0.1 + h)? - w(0.1 - h)?) / (2.0 * h);
    println!("S11 analytic {:.9}, central difference {fd:.9}", fung_stress(&params, &strain)?.s11);
    Ok(())
}
