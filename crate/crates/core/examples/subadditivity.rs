//! m(a1, a2) against m(d1, d2) + m(a1 - d1, a2 - d2) for a few splits.

use normsolve::solvers::{subadditivity_check, SolverOptions};
use normsolve::suite::h0_config;

fn main() -> normsolve::Result<()> {
    let (p, k) = h0_config()?;
    let opts = SolverOptions::default();
    println!("    d1     d2      m(a)          m(d)          m(a-d)        slack");
    for (d1, d2) in [(0.5, 0.5), (0.2, 0.7), (0.9, 0.1), (1.0, 1.0)] {
        let r = subadditivity_check(&p, &k, d1, d2, &opts)?;
        println!(
            "{d1:6} {d2:6}  {:.6e}  {:.6e}  {:.6e}  {:.3e}",
            r.m_total, r.m_part, r.m_rest, r.slack
        );
    }
    Ok(())
}
