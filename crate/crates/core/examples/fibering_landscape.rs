//! The fibering map t -> J(t^{N/2} u(t x)) of a trial pair: coefficients,
//! stationary points and a coarse printout of the curve.

use normsolve::solvers::fibering_curve;
use normsolve::suite::h0_config;
use normsolve::{Profile, RadialGrid, StatePair};

fn main() -> normsolve::Result<()> {
    let (p, _) = h0_config()?;
    let g = RadialGrid::new(3, 20.0, 2049)?;
    let mut st = StatePair::new(
        Profile::from_fn(g.clone(), |r| (-r * r / 4.0).exp()),
        Profile::from_fn(g, |r| (-r * r / 6.0).exp()),
    )?;
    st.normalize_masses(p.a1, p.a2)?;
    let curve = fibering_curve(&st, &p);
    println!("{:?}", curve.coeffs);
    for s in &curve.stationary_points {
        println!("{:?} at t = {:.6}, theta = {:.6e}", s.kind, s.t, s.theta);
    }
    for (t, th) in curve.samples.iter().step_by(50) {
        println!("{t:10.4e}  {th:12.5e}");
    }
    Ok(())
}
