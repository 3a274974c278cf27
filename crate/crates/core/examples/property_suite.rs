//! Every property check at desk scale, one line each.

use normsolve::solvers::SolverOptions;
use normsolve::suite::{property_suite, SuiteScale};

fn main() {
    let scratch = std::env::temp_dir().join("normsolve_suite");
    let results = property_suite(&SuiteScale::default(), 0, &SolverOptions::default(), &scratch);
    for r in &results {
        println!("{} {}: {:.3e} (bound {:.3e})", if r.passed { "ok  " } else { "FAIL" }, r.name, r.measured, r.bound);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", results.len());
}
