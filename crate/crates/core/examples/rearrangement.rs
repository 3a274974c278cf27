//! Two-function rearrangement {u, v}*: closed-form Gaussian case, norm
//! additivity, gradient reduction and the cross-term inequality.

use normsolve::rearrange::{cross_term_inequality_check, norm_additivity_defect, shibata, shibata_power_identity_check};
use normsolve::{Profile, RadialGrid};

fn main() -> normsolve::Result<()> {
    let g = RadialGrid::new(3, 12.0, 4097)?;
    let u = Profile::from_fn(g.clone(), |r| (-r * r).exp());
    let v = Profile::from_fn(g.clone(), |r| 0.6 * (-(r - 2.0).powi(2)).exp());
    let w = shibata(&u, &v)?;
    println!("output grid r_max {:.3}, {} nodes", w.grid().r_max(), w.grid().len());
    for p in [2.0, 2.5, 4.0] {
        println!("L^{p} additivity defect {:.2e}", norm_additivity_defect(&u, &v, &w, p));
    }
    println!(
        "|grad w|^2 = {:.6} <= |grad u|^2 + |grad v|^2 = {:.6}",
        w.grad_norm_sq(),
        u.grad_norm_sq() + v.grad_norm_sq()
    );
    println!("power identity (r = 2.5) {:.2e}", shibata_power_identity_check(&u, &v, 2.5)?.max_deviation);
    let u2 = Profile::from_fn(g.clone(), |r| (-r * r / 2.0).exp());
    let v2 = Profile::from_fn(g, |r| 0.3 * (-r).exp());
    let rep = cross_term_inequality_check(&u, &u2, &v, &v2, 1.5, 2.0)?;
    println!("cross term: lhs {:.6} <= rhs {:.6} (slack {:.2e})", rep.lhs, rep.rhs, rep.slack);
    Ok(())
}
