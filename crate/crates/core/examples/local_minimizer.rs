//! Local minimizer inside B(rho0) for the reference H0 configuration.

use normsolve::solvers::{initial_pair, local_minimize, SolverOptions};
use normsolve::suite::h0_config;

fn main() -> normsolve::Result<()> {
    env_logger::init();
    let (p, k) = h0_config()?;
    let opts = SolverOptions::default();
    let init = initial_pair(&p, &k, &opts)?;
    let rec = local_minimize(&p, &k, &init, &opts)?;
    println!("beta = {:.6} (beta0/2)", p.beta);
    println!("m(a1, a2) = J = {:.10e}", rec.energy);
    println!("kinetic   = {:.6} < rho0 = {:.6}", rec.kinetic(), k.rho0);
    println!("lambda    = ({:.6}, {:.6})", rec.lambda1, rec.lambda2);
    println!("residuals: Q {:.2e}, gradient {:.2e}", rec.pohozaev_residual, rec.grad_residual);
    let out = std::env::temp_dir().join("normsolve_local");
    let path = rec.save(&out, "local")?;
    println!("saved {}", path.display());
    Ok(())
}
