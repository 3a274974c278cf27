//! End-to-end solver behaviour on the reference configurations.

use normsolve::run::{run, ConfigMap, RunConfig};
use normsolve::solvers::{initial_pair, local_minimize, mountain_pass, subadditivity_check, SolverOptions};
use normsolve::suite::h0_config;
use normsolve::{Classification, SolutionRecord};

#[test]
fn multistart_local_minima_agree() {
    let (p, k) = h0_config().unwrap();
    let energies: Vec<f64> = (0..5)
        .map(|seed| {
            let opts = SolverOptions { seed, ..Default::default() };
            let init = initial_pair(&p, &k, &opts).unwrap();
            local_minimize(&p, &k, &init, &opts).unwrap().energy
        })
        .collect();
    let (lo, hi) = energies.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| (a.min(*e), b.max(*e)));
    assert!(hi < 0.0);
    assert!(hi - lo <= 1e-6, "{energies:?}");
}

#[test]
fn mountain_pass_above_local_and_round_trip() {
    let (p, k) = h0_config().unwrap();
    let opts = SolverOptions::default();
    let local = local_minimize(&p, &k, &initial_pair(&p, &k, &opts).unwrap(), &opts).unwrap();
    assert!(local.kinetic() <= k.rho0);
    let mp = mountain_pass(&p, &k, &local, &opts).unwrap();
    assert_eq!(mp.classification, Classification::MountainPass);
    assert!(mp.energy > 0.0 && mp.kinetic() > k.rho0);
    assert!(mp.lambda1 < 0.0 && mp.lambda2 < 0.0);
    mp.certify(opts.tol).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = mp.save(dir.path(), "mp").unwrap();
    let back = SolutionRecord::load(&path).unwrap();
    // energy is recomputed on load
    assert!((back.energy - mp.energy).abs() <= 1e-12 * mp.energy.abs());
    assert_eq!(back.state.u1.values(), mp.state.u1.values());
}

#[test]
fn trivial_split_is_an_equality() {
    let (p, k) = h0_config().unwrap();
    let rep = subadditivity_check(&p, &k, p.a1, p.a2, &SolverOptions::default()).unwrap();
    assert_eq!(rep.m_rest, 0.0);
    assert!((rep.m_total - rep.m_part).abs() < 1e-12);
    assert!(rep.holds && rep.total_negative);
    assert!(subadditivity_check(&p, &k, 2.0 * p.a1, 0.0, &SolverOptions::default()).is_err());
}

#[test]
fn solve_local_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let text = "task = \"solve-local\"\nN = 3\np1 = 2.5\np2 = 2.5\nr1 = 2\nr2 = 2\na1 = 1\na2 = 0.5\nseed = 7\n";
    let mut outs = Vec::new();
    for sub in ["x", "y"] {
        let mut map = ConfigMap::parse(text).unwrap();
        map.set("output_dir", &format!("\"{}\"", dir.path().join(sub).display())).unwrap();
        let out = run(&RunConfig::from_map(&map, None).unwrap()).unwrap();
        assert_eq!(out.exit_code, 0);
        outs.push(std::fs::read(dir.path().join(sub).join("local.json")).unwrap());
        outs.push(std::fs::read(dir.path().join(sub).join("local_u1.bin")).unwrap());
    }
    assert_eq!(outs[0], outs[2]);
    assert_eq!(outs[1], outs[3]);
}
