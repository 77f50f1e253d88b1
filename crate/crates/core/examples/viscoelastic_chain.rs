//! Three masses between two walls with a fading-memory kernel on the
//! first spring, a nonlinear spring and damping: energy bookkeeping over
//! a simulated run.

use nalgebra::{DMatrix, DVector};
use tissue_qlv::constitutive::ExponentialTensileLaw;
use tissue_qlv::kernels::PronySpectrum;
use tissue_qlv::network::{
    simulate, stability_check, Anchor, ForceSchedule, KernelEntry, NonlinearSpring, SpringMassSystem, SystemState,
};

fn main() -> tissue_qlv::Result<()> {
    let k = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
    println!("stiffness screening: {:?}", stability_check(&k)?);

    let memory = KernelEntry::new(0, 0, 1.0, PronySpectrum::new(2.0, [(0.5, 2.0)])?)?;
    let spring = NonlinearSpring::new(2, Anchor::Ground, ExponentialTensileLaw::new(5.0, 0.2)?, 1.0, 1.0, None)?;
    let system = SpringMassSystem::new(vec![1.0, 1.0, 1.0], k)?
        .with_damping(DMatrix::from_diagonal(&DVector::from_element(3, 0.02)))?
        .add_memory(memory)?
        .add_spring(spring)?
        .add_force(1, ForceSchedule::Sine { amplitude: 0.05, frequency: 0.7, phase: 0.0 })?;

    let dt = system.shortest_period()? / 100.0;
    let initial = SystemState::new(&system, DVector::from_vec(vec![0.1, 0.0, 0.0]), DVector::zeros(3))?;
    let run = simulate(&system, &initial, 40.0, dt, 100)?;

    println!("dt = {dt:.5}, {} steps", run.steps);
    println!("{:>7} {:>10} {:>10} {:>10} {:>10} {:>10}", "t", "q0", "kinetic", "elastic", "work", "dissip.");
    for s in &run.samples {
        let e = &s.energy;
        println!(
            "{:>7.2} {:>10.5} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            s.time, s.q[0], e.kinetic, e.elastic, e.external_work, e.dissipation
        );
    }
    let start = run.samples[0].energy.balance();
    println!(
        "K + U + D - W: {start:.6e} at t = 0, {:.6e} at the end (relative change {:.1e})",
        run.final_energy.balance(),
        (run.final_energy.balance() - start).abs() / start
    );
    Ok(())
}
