//! Second solution under H1: linking over the rectangle of component
//! dilations, with the boundary bound and degree checks.

use normsolve::solvers::{linking_geometry, linking_setup, linking_solve, SolverOptions};
use normsolve::suite::h1_config;

fn main() -> normsolve::Result<()> {
    env_logger::init();
    let (p, k) = h1_config()?;
    let opts = SolverOptions::default();
    let setup = linking_setup(&p, &k, &opts)?;
    println!("beta = {:.6}, beta1 = {:.6}", p.beta, setup.beta1);
    println!("scalar levels l1, l2 = {:.6}, {:.6}", setup.levels.0, setup.levels.1);
    println!("rectangle (log t): {:?}", setup.rect);
    let geo = linking_geometry(&setup, &p, 4, opts.seed)?;
    println!("sup over boundary {:.6} < {:.6}: {}", geo.boundary_sup, geo.boundary_bound, geo.boundary_ok);
    for c in &geo.degree_checks {
        println!("  deformation (amplitude {:.3}): winding {}, zero {:?}", c.amplitude, c.winding, c.zero);
    }
    let (rec, _) = linking_solve(&p, &k, &opts)?;
    println!("c(a) = {:.10e}  lambda = ({:.6}, {:.6})", rec.energy, rec.lambda1, rec.lambda2);
    println!("residuals: Q {:.2e}, gradient {:.2e}", rec.pohozaev_residual, rec.grad_residual);
    Ok(())
}
