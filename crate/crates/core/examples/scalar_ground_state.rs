//! Scalar ground states: the N = 1 profile against its sech closed form and
//! the summary constants for a few (N, p).

use normsolve::scalar::{ground_state, ground_summary, level};
use normsolve::suite::sech_ground_state;

fn main() -> normsolve::Result<()> {
    let gs = ground_state(1, 4.0)?;
    let err = gs
        .w0
        .grid()
        .nodes()
        .iter()
        .zip(gs.w0.values())
        .map(|(x, v)| (v - sech_ground_state(4.0, *x)).abs())
        .fold(0.0, f64::max);
    println!("N=1, p=4: sup |w - sqrt(2) sech| = {err:.2e}");

    println!("\n N    p        C0          C1          GN constant");
    for (n, p) in [(1, 3.0), (1, 5.0), (2, 3.0), (2, 4.5), (3, 3.5), (3, 4.0)] {
        let s = ground_summary(n, p)?;
        println!("{n:2} {p:4}   {:.6e}  {:.6e}  {:.6e}", s.c0, s.c1, s.gn_constant);
    }
    // mass-supercritical scalar level l(N, a, mu, p)
    println!("\nl(3, a=1, mu=1, p=4) = {:.6e}", level(3, 1.0, 1.0, 4.0)?);
    Ok(())
}
