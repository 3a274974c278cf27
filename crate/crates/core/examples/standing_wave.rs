//! Time evolution of the one-dimensional probe minimizer: standing-wave
//! consistency, then a 1% perturbation and its orbital distance.

use normsolve::dynamics::{probe_solution, probe_time_step, stability_probe, standing_wave_probe};
use normsolve::solvers::SolverOptions;

fn main() -> normsolve::Result<()> {
    env_logger::init();
    let rec = probe_solution(&SolverOptions::default(), 2049)?;
    println!("probe minimizer: J = {:.8e}, lambda = ({:.6}, {:.6})", rec.energy, rec.lambda1, rec.lambda2);
    let dt = probe_time_step(&rec, 200);
    let sw = standing_wave_probe(&rec, 5.0, dt)?;
    println!("5 periods, dt = {dt:.4}: |Psi| deviation {:.2e}, phase error {:.2e}", sw.modulus_deviation, sw.phase_rate_error);
    println!("mass drift per unit time {:.2e}, energy drift {:.2e}", sw.mass_drift_per_time, sw.energy_drift);
    let st = stability_probe(&rec, 0.01, 3, 20.0, dt, 1)?;
    println!(
        "1% perturbation to T = 20: distance {:.3e} -> max {:.3e} (x{:.2})",
        st.initial_distance, st.max_distance, st.growth
    );
    Ok(())
}
