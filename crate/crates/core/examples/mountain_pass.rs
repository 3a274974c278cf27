//! Second solution under H0: mountain pass over the local minimizer.

use normsolve::solvers::{dilation_path, initial_pair, local_minimize, mountain_pass, SolverOptions};
use normsolve::suite::h0_config;

fn main() -> normsolve::Result<()> {
    env_logger::init();
    let (p, k) = h0_config()?;
    let opts = SolverOptions::default();
    let local = local_minimize(&p, &k, &initial_pair(&p, &k, &opts)?, &opts)?;
    let path = dilation_path(&local.state, &p, &k, k.rho_bar(opts.rho_bar_fraction), 64)?;
    println!("initial dilation path: admissible {}, peak {:.6}", path.admissible, path.max_energy);
    let mp = mountain_pass(&p, &k, &local, &opts)?;
    println!("m(a)      = {:.10e}", local.energy);
    println!("gamma(a)  = {:.10e}", mp.energy);
    println!("kinetic   = {:.6} (rho0 = {:.6})", mp.kinetic(), k.rho0);
    println!("lambda    = ({:.6}, {:.6})", mp.lambda1, mp.lambda2);
    println!("residuals: Q {:.2e}, gradient {:.2e}", mp.pohozaev_residual, mp.grad_residual);
    Ok(())
}
