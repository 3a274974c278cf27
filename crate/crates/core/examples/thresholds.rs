//! Geometry constants of the reference H0 configuration and how beta0
//! reacts to the masses.

use normsolve::model::{compute_thresholds, GnConstants};
use normsolve::suite::h0_params;

fn main() -> normsolve::Result<()> {
    let p = h0_params();
    let gn = GnConstants::sharp_or_analytic(&p)?;
    let k = compute_thresholds(&p, &gn)?;
    let rep = k.report(&p);
    println!("regime {:?}  (GN constants: {:?})", k.regime, k.gn_source);
    println!("rho0  = {:.6}", k.rho0);
    println!("beta0 = {:.6}", k.beta0);
    println!("K1, K2, K3 = {:.6}, {:.6}, {:.6}", k.k1, k.k2, k.k3);
    println!("defining inequalities: {:.6} <= 1/8, {:.6} <= 1/8", rep.rho_condition, rep.beta_condition);
    println!("\n   a   beta0(a, a)");
    for a in [0.01, 0.1, 1.0, 10.0] {
        let k = compute_thresholds(&p.with_masses(a, a), &gn)?;
        println!("{a:5}   {:.6e}", k.beta0);
    }
    Ok(())
}
