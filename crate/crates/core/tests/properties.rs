//! Randomized invariants.

use proptest::prelude::*;

use normsolve::rearrange::{norm_additivity_defect, schwarz, shibata};
use normsolve::run::{ConfigMap, RunConfig, Task};
use normsolve::solvers::fibering::{count_sign_changes_dense, stationary_points};
use normsolve::solvers::{stationary_bracket, FiberingCoeffs};
use normsolve::{Profile, RadialGrid, StatePair};

fn bump(dim: usize, n: usize, parts: &[(f64, f64, f64)]) -> Profile {
    let g = RadialGrid::new(dim, 16.0, n).unwrap();
    let parts = parts.to_vec();
    let mut u = Profile::from_fn(g, move |r| parts.iter().map(|(c, s, a)| a * (-((r - c) / s).powi(2)).exp()).sum());
    *u.values_mut().last_mut().unwrap() = 0.0;
    u
}

fn centred() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((Just(0.0), 0.5..2.0f64, 0.1..1.5f64), 1..=3)
}

fn shifted() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.0..4.0f64, 0.5..2.0f64, 0.1..1.5f64), 1..=3)
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rearrangement_is_monotone_symmetric_and_additive(dim in 1..=3usize, a in centred(), b in centred()) {
        let u = bump(dim, 2049, &a);
        let v = bump(dim, 2049, &b);
        let w = shibata(&u, &v).unwrap();
        prop_assert!(nonincreasing(w.values()));
        let w2 = shibata(&v, &u).unwrap();
        for (x, y) in w.values().iter().zip(w2.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
        for p in [2.0, 3.0] {
            prop_assert!(norm_additivity_defect(&u, &v, &w, p).abs() < 1e-3);
        }
        prop_assert!(w.grad_norm_sq() < u.grad_norm_sq() + v.grad_norm_sq());
        prop_assert!((w.sup_norm() - u.sup_norm().max(v.sup_norm())).abs() < 1e-12);
    }

    #[test]
    fn schwarz_is_idempotent_and_keeps_the_sup(dim in 1..=3usize, a in shifted()) {
        let u = bump(dim, 1025, &a);
        let s = schwarz(&u).unwrap();
        prop_assert!(nonincreasing(s.values()));
        let again = schwarz(&s).unwrap();
        prop_assert_eq!(again.values(), s.values());
        prop_assert_eq!(s.sup_norm(), u.sup_norm());
    }

    #[test]
    fn dilation_keeps_the_mass(dim in 1..=3usize, t in 0.3..3.0f64, a in centred(), b in centred()) {
        let st = StatePair::new(bump(dim, 2049, &a), bump(dim, 2049, &b)).unwrap();
        let d = st.dilate_exact(t).unwrap();
        let (m1, m2) = st.masses();
        let (n1, n2) = d.masses();
        prop_assert!(((n1 - m1) / m1).abs() < 1e-12);
        prop_assert!(((n2 - m2) / m2).abs() < 1e-12);
        // kinetic energy scales by t²
        prop_assert!((d.kinetic() / st.kinetic() / (t * t) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fibering_has_at_most_two_stationary_points(
        n in 1..=3usize,
        x1 in 0.0..1.0f64, x2 in 0.0..1.0f64, xs in 0.0..1.0f64,
        la in -2.0..2.0f64, l1 in -2.0..2.0f64, l2 in -2.0..2.0f64, lc in -2.0..2.0f64,
    ) {
        let nf = n as f64;
        let crit = 2.0 + 4.0 / nf;
        let top = if n >= 3 { 6.0 } else { crit + 4.0 };
        let p1 = 2.0 + x1 * (crit - 2.0);
        let p2 = 2.0 + x2 * (crit - 2.0);
        let s = crit + xs * (top - crit);
        prop_assume!((p1 <= s - 2.0 / nf && p2 <= s - 2.0 / nf) || (p1 - p2).abs() <= 2.0 / nf);
        let e = |p: f64| (p / 2.0 - 1.0) * nf;
        let c = FiberingCoeffs {
            a: 10f64.powf(la), b1: 10f64.powf(l1), b2: 10f64.powf(l2), c: 10f64.powf(lc),
            e1: e(p1), e2: e(p2), e3: e(s),
        };
        if let Some((lo, hi)) = stationary_bracket(&c) {
            let dense = count_sign_changes_dense(&c, lo / 1.01, hi * 1.01, 100_000);
            prop_assert!(dense <= 2);
            prop_assert_eq!(stationary_points(&c, lo / 1.01, hi * 1.01, 4001).len(), dense);
            // theta is decreasing on both sides of the bracket
            prop_assert!(c.reduced_derivative(lo / 1.01) < 0.0);
            prop_assert!(c.reduced_derivative(hi * 1.01) < 0.0);
        }
    }

    #[test]
    fn config_values_round_trip(
        p1 in 2.01..3.3f64, p2 in 2.01..3.3f64, r1 in 1.1..3.0f64, r2 in 1.1..3.0f64,
        a1 in 0.1..5.0f64, a2 in 0.1..5.0f64, beta in 0.0..2.0f64, seed in 0u64..1000,
    ) {
        let text = format!(
            "task = \"solve-local\"\nN = 3\np1 = {p1:?}\np2 = {p2:?}\nr1 = {r1:?}\nr2 = {r2:?}\n\
             a1 = {a1:?}\na2 = {a2:?}\nbeta = {beta:?}\nseed = {seed}\n"
        );
        let cfg = RunConfig::from_map(&ConfigMap::parse(&text).unwrap(), None).unwrap();
        prop_assert_eq!(cfg.task, Task::SolveLocal);
        let p = cfg.params.unwrap();
        prop_assert_eq!((p.p1, p.p2, p.r1, p.r2, p.a1, p.a2, p.beta), (p1, p2, r1, r2, a1, a2, beta));
        prop_assert_eq!(cfg.opts.seed, seed);
    }
}
