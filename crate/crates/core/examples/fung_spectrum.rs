//! Continuous relaxation spectrum S(q) = c/q on [q1, q2]: closed form
//! against quadrature, and the error of its Prony discretization as the
//! number of terms grows.

use tissue_qlv::kernels::{fung_reduced_relaxation, fung_reduced_relaxation_quadrature, fung_to_prony, FungSpectrum};
use tissue_qlv::protocols::log_space;

fn main() -> tissue_qlv::Result<()> {
    let s = FungSpectrum::new(0.5, 0.01, 100.0)?;
    println!("G(inf) = {:.6}", s.equilibrium());
    println!("{:>10} {:>14} {:>14}", "t", "closed form", "quadrature");
    for t in log_space(1e-3, 1e4, 8)? {
        println!(
            "{t:>10.3e} {:>14.10} {:>14.10}",
            fung_reduced_relaxation(&s, t)?,
            fung_reduced_relaxation_quadrature(&s, t)?
        );
    }

    let grid = log_space(s.q1() / 10.0, 10.0 * s.q2(), 200)?;
    for n in [4, 8, 16, 32, 64, 128] {
        let prony = fung_to_prony(&s, n)?;
        let mut worst: f64 = 0.0;
        for &t in &grid {
            worst = worst.max((prony.value(t) - fung_reduced_relaxation(&s, t)?).abs());
        }
        println!("{n:>4} terms: max |G_prony - G| = {worst:.2e}");
    }
    Ok(())
}
