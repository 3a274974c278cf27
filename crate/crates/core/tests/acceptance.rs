//! Acceptance run: each criterion at its stated sample size, tolerance and
//! time budget. Prints one PASS/FAIL line per criterion and exits nonzero if
//! any fails.

use std::time::{Duration, Instant};

use normsolve::solvers::SolverOptions;
use normsolve::suite::{
    certificate_checks, dynamics_checks, fibering_sweep, h0_config, h1_config, line_ground_states,
    linking_geometry_checks, rearrangement_suite, scalar_scaling_laws, subadditivity, threshold_monotonicity,
    PropertyResult, SuiteScale,
};

const SEED: u64 = 1;

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    check: fn(&SuiteScale, &SolverOptions) -> Vec<PropertyResult>,
}

fn mins(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: 1,
            title: "scalar scaling laws (10 draws, 1e-4 relative)",
            budget: mins(2),
            check: |s, _| scalar_scaling_laws(s.scalar_draws, SEED),
        },
        Criterion {
            id: 2,
            title: "N=1 ground state vs sech, p in {3,4,5} (sup <= 1e-6)",
            budget: Duration::from_secs(30),
            check: |_, _| vec![line_ground_states(&[3.0, 4.0, 5.0])],
        },
        Criterion {
            id: 3,
            title: "critical-point certificates, H0 and H1 (residual <= 1e-5)",
            budget: mins(15),
            check: |_, o| {
                let mut out = Vec::new();
                for (label, cfg) in [("H0", h0_config()), ("H1", h1_config())] {
                    match cfg {
                        Ok((p, k)) => out.extend(certificate_checks(label, &p, &k, o).0),
                        Err(e) => panic!("{label} configuration: {e}"),
                    }
                }
                out
            },
        },
        Criterion {
            id: 4,
            title: "rearrangement suite (1e4 quadruples, allowance 1e-6)",
            budget: mins(5),
            check: |s, _| rearrangement_suite(s.rearrange_n, s.rearrange_quadruples, SEED),
        },
        Criterion {
            id: 5,
            title: "fibering map: at most two stationary points (1e4 draws)",
            budget: mins(3),
            check: |s, _| vec![fibering_sweep(s.fibering_draws, s.fibering_dense, SEED)],
        },
        Criterion {
            id: 6,
            title: "threshold monotonicity and growth",
            budget: mins(1),
            check: |_, _| threshold_monotonicity(),
        },
        Criterion {
            id: 7,
            title: "sub-additivity, 5 random splits (+2 tol)",
            budget: mins(20),
            check: |s, o| {
                let (p, k) = h0_config().expect("H0 configuration");
                vec![subadditivity(&p, &k, s.subadd_splits, SEED, o)]
            },
        },
        Criterion {
            id: 8,
            title: "standing wave (20 periods) and 1% perturbation to T=50",
            budget: mins(10),
            check: |s, o| dynamics_checks(s, SEED, o),
        },
        Criterion {
            id: 9,
            title: "linking geometry: boundary bound and degree check",
            budget: mins(10),
            check: |s, o| {
                let (p, k) = h1_config().expect("H1 configuration");
                linking_geometry_checks(&p, &k, s.degree_deformations, SEED, o)
            },
        },
    ]
}

fn main() {
    let scale = SuiteScale::acceptance();
    let opts = SolverOptions::default();
    // `cargo test -- 3 8` runs a subset
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria() {
        if !only.is_empty() && !only.contains(&c.id) {
            continue;
        }
        let start = Instant::now();
        let results = (c.check)(&scale, &opts);
        let elapsed = start.elapsed();
        let ok = !results.is_empty() && results.iter().all(|r| r.passed) && elapsed <= c.budget;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {}: {} - {} [{:.1}s / budget {}s]",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.title,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
        for r in &results {
            println!(
                "    {} {}: measured {:.4e}, bound {:.4e}",
                if r.passed { "ok  " } else { "FAIL" },
                r.name,
                r.measured,
                r.bound
            );
            if !r.passed {
                println!("         {}", r.details);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
