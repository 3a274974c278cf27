//! Property checks with measured margins. Each check returns one or more
//! [`PropertyResult`]s; the `property-suite` command and the acceptance
//! tests run the same checks at different scales.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::{probe_solution, probe_time_step, stability_probe, standing_wave_probe};
use crate::energy::{energy, pohozaev, SolutionRecord, StatePair};
use crate::error::Result;
use crate::grid::{Profile, RadialGrid};
use crate::model::{compute_thresholds, mass_critical_exponent, GeometryConstants, GnConstants, Params};
use crate::rearrange::{cross_term_inequality_check, norm_additivity_defect, shibata, shibata_power_identity_check};
use crate::scalar::{ground_state, level, scalar_energy, scaled_soliton, soliton_norms};
use crate::solvers::fibering::{count_sign_changes_dense, stationary_points};
use crate::solvers::{
    beta1, initial_pair, linking_geometry, linking_setup, linking_solve, local_minimize, mountain_pass, stationary_bracket,
    subadditivity_check, FiberingCoeffs, SolverOptions,
};

/// One checked property: `measured` is compared against `bound` in the
/// direction stated by `name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub details: serde_json::Value,
}

impl PropertyResult {
    fn at_most(name: &str, measured: f64, bound: f64, details: serde_json::Value) -> Self {
        Self {
            name: name.into(),
            passed: measured <= bound,
            measured,
            bound,
            details,
        }
    }

    fn failed(name: &str, err: impl std::fmt::Display) -> Self {
        Self {
            name: name.into(),
            passed: false,
            measured: f64::NAN,
            bound: f64::NAN,
            details: json!({ "error": err.to_string() }),
        }
    }
}

/// Sample sizes for the randomized checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteScale {
    pub scalar_draws: usize,
    pub rearrange_n: usize,
    pub rearrange_quadruples: usize,
    pub fibering_draws: usize,
    pub fibering_dense: usize,
    pub subadd_splits: usize,
    pub standing_periods: f64,
    pub stability_time: f64,
    pub degree_deformations: usize,
    pub dynamics_n: usize,
}

impl Default for SuiteScale {
    fn default() -> Self {
        Self {
            scalar_draws: 4,
            rearrange_n: 1024,
            rearrange_quadruples: 1000,
            fibering_draws: 1000,
            fibering_dense: 100_000,
            subadd_splits: 2,
            standing_periods: 2.0,
            stability_time: 10.0,
            degree_deformations: 2,
            dynamics_n: 2049,
        }
    }
}

impl SuiteScale {
    /// Sizes named by the acceptance criteria.
    pub fn acceptance() -> Self {
        Self {
            scalar_draws: 10,
            rearrange_n: 1024,
            rearrange_quadruples: 10_000,
            fibering_draws: 10_000,
            fibering_dense: 1_000_000,
            subadd_splits: 5,
            standing_periods: 20.0,
            stability_time: 50.0,
            degree_deformations: 6,
            dynamics_n: 2049,
        }
    }
}

/// `N = 3, p1 = p2 = 2.5, r1 = r2 = 2`, unit strengths and masses.
pub fn h0_params() -> Params {
    Params {
        dim: 3,
        p1: 2.5,
        p2: 2.5,
        r1: 2.0,
        r2: 2.0,
        mu1: 1.0,
        mu2: 1.0,
        beta: 0.0,
        a1: 1.0,
        a2: 1.0,
    }
}

/// `N = 3, p1 = p2 = 4, r1 = r2 = 1.4`, unit strengths and masses.
pub fn h1_params() -> Params {
    Params {
        p1: 4.0,
        p2: 4.0,
        r1: 1.4,
        r2: 1.4,
        ..h0_params()
    }
}

/// The H0 configuration at `β = β0/2` with its constants.
pub fn h0_config() -> Result<(Params, GeometryConstants)> {
    let p = h0_params();
    let gn = GnConstants::sharp_or_analytic(&p)?;
    let b0 = compute_thresholds(&p, &gn)?.beta0;
    let p = p.with_beta(0.5 * b0);
    Ok((p, compute_thresholds(&p, &gn)?))
}

/// The H1 configuration at `β = min(β0, β1)/2` with its constants.
pub fn h1_config() -> Result<(Params, GeometryConstants)> {
    let p = h1_params();
    let gn = GnConstants::sharp_or_analytic(&p)?;
    let b0 = compute_thresholds(&p, &gn)?.beta0;
    let p = p.with_beta(0.5 * b0.min(beta1(&p)?));
    Ok((p, compute_thresholds(&p, &gn)?))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Upper end of the exponent range used for random draws: `2*` when finite,
/// otherwise `2 + 4/N + 4`.
fn p_upper(dim: usize) -> f64 {
    if dim >= 3 {
        2.0 * dim as f64 / (dim as f64 - 2.0)
    } else {
        mass_critical_exponent(dim) + 4.0
    }
}

/// Quadrature norms and energy of scaled solitons against their closed forms
/// for random `(N, a, μ, p)` with `2 + 4/N < p < 2*`.
pub fn scalar_scaling_laws(draws: usize, seed: u64) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(usize, f64, f64, f64)> = (0..draws)
        .map(|_| {
            let dim = rng.gen_range(1..=3usize);
            let (lo, hi) = (mass_critical_exponent(dim), p_upper(dim));
            let w = hi - lo;
            let p = rng.gen_range(lo + 0.05 * w..hi - 0.05 * w);
            (dim, rng.gen_range(0.2..5.0), rng.gen_range(0.2..5.0), p)
        })
        .collect();
    let rows: Vec<std::result::Result<serde_json::Value, String>> = cases
        .par_iter()
        .map(|&(dim, a, mu, p)| {
            let w = scaled_soliton(a, mu, p, dim).map_err(|e| e.to_string())?;
            let (g, l) = soliton_norms(dim, a, mu, p).map_err(|e| e.to_string())?;
            let lev = level(dim, a, mu, p).map_err(|e| e.to_string())?;
            let norm_err = rel(w.profile.grad_norm_sq(), g)
                .max(rel(w.profile.lp_integral(p), l))
                .max(rel(w.profile.mass(), a));
            let level_err = rel(scalar_energy(&w.profile, mu, p), lev);
            Ok(json!({ "N": dim, "a": a, "mu": mu, "p": p, "norm_error": norm_err, "level_error": level_err }))
        })
        .collect();
    let mut norm_max = 0.0f64;
    let mut level_max = 0.0f64;
    let mut table = Vec::new();
    for r in rows {
        match r {
            Ok(v) => {
                norm_max = norm_max.max(v["norm_error"].as_f64().unwrap_or(f64::NAN));
                level_max = level_max.max(v["level_error"].as_f64().unwrap_or(f64::NAN));
                table.push(v);
            }
            Err(e) => return vec![PropertyResult::failed("scalar scaling laws", e)],
        }
    }
    vec![
        PropertyResult::at_most("soliton norms match closed forms (relative)", norm_max, 1e-4, json!(table)),
        PropertyResult::at_most("soliton level matches closed form (relative)", level_max, 1e-4, json!(null)),
    ]
}

/// `((p/2) sech²((p-2)x/2))^{1/(p-2)}`, the one-dimensional ground state.
pub fn sech_ground_state(p: f64, x: f64) -> f64 {
    let c = 1.0 / ((p - 2.0) * x / 2.0).cosh();
    (p / 2.0 * c * c).powf(1.0 / (p - 2.0))
}

/// One-dimensional ground states against the sech closed form.
pub fn line_ground_states(ps: &[f64]) -> PropertyResult {
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for &p in ps {
        match ground_state(1, p) {
            Ok(gs) => {
                let err = gs
                    .w0
                    .grid()
                    .nodes()
                    .iter()
                    .zip(gs.w0.values())
                    .map(|(x, v)| (v - sech_ground_state(p, *x)).abs())
                    .fold(0.0, f64::max);
                worst = worst.max(err);
                rows.push(json!({ "p": p, "sup_error": err }));
            }
            Err(e) => return PropertyResult::failed("line ground state", e),
        }
    }
    PropertyResult::at_most("N=1 ground state vs sech profile (sup)", worst, 1e-6, json!(rows))
}

/// Solutions computed by [`certificate_checks`].
#[derive(Debug, Clone)]
pub struct CertifiedPair {
    pub local: SolutionRecord,
    pub second: SolutionRecord,
}

fn certificate_row(name: &str, rec: &SolutionRecord, tol: f64, sign_ok: bool, extra: serde_json::Value) -> PropertyResult {
    let residual = rec.grad_residual.max(rec.pohozaev_residual);
    PropertyResult {
        name: name.into(),
        passed: residual <= tol && sign_ok && rec.lambda1 < 0.0 && rec.lambda2 < 0.0,
        measured: residual,
        bound: tol,
        details: json!({
            "energy": rec.energy,
            "lambda1": rec.lambda1,
            "lambda2": rec.lambda2,
            "q_residual": rec.pohozaev_residual,
            "grad_residual": rec.grad_residual,
            "kinetic": rec.kinetic(),
            "rho0": rec.constants.rho0,
            "extra": extra,
        }),
    }
}

/// Local minimizer plus the second critical point (mountain pass under H0,
/// linking under H1) with their certificates and the level ordering.
pub fn certificate_checks(
    label: &str,
    params: &Params,
    constants: &GeometryConstants,
    opts: &SolverOptions,
) -> (Vec<PropertyResult>, Option<CertifiedPair>) {
    let tol = opts.tol;
    let local = initial_pair(params, constants, opts).and_then(|init| local_minimize(params, constants, &init, opts));
    let local = match local {
        Ok(r) => r,
        Err(e) => return (vec![PropertyResult::failed(&format!("{label} local minimizer"), e)], None),
    };
    let in_ball = local.kinetic() <= constants.rho0;
    let mut out = vec![certificate_row(
        &format!("{label} local minimizer: J < 0, in B(rho0), lambda < 0, residual"),
        &local,
        tol,
        local.energy < 0.0 && in_ball,
        json!({ "in_ball": in_ball }),
    )];
    let second = match constants.regime {
        crate::model::Regime::H0 => mountain_pass(params, constants, &local, opts).map(|r| (r, json!(null))),
        _ => linking_solve(params, constants, opts).map(|(r, rep)| (r, json!(rep))),
    };
    let (second, extra) = match second {
        Ok(r) => r,
        Err(e) => {
            out.push(PropertyResult::failed(&format!("{label} second critical point"), e));
            return (out, None);
        }
    };
    out.push(certificate_row(
        &format!("{label} second critical point: J > 0, lambda < 0, residual"),
        &second,
        tol,
        second.energy > 0.0,
        extra,
    ));
    out.push(PropertyResult {
        name: format!("{label} level ordering m < 0 < level"),
        passed: local.energy < 0.0 && 0.0 < second.energy,
        measured: local.energy,
        bound: second.energy,
        details: json!({ "m": local.energy, "level": second.energy }),
    });
    (out, Some(CertifiedPair { local, second }))
}

/// Random positive radial bump: a sum of Gaussians, optionally centred
/// off the origin (then not monotone).
fn random_profile(rng: &mut ChaCha8Rng, grid: &std::sync::Arc<RadialGrid>, monotone: bool) -> Profile {
    let bumps: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..=3))
        .map(|_| {
            let c = if monotone { 0.0 } else { rng.gen_range(0.0..4.0) };
            (c, rng.gen_range(0.5..2.0), rng.gen_range(0.1..1.5))
        })
        .collect();
    let mut u = Profile::from_fn(grid.clone(), |r| {
        bumps.iter().map(|(c, s, a)| a * (-((r - c) / s).powi(2)).exp()).sum()
    });
    *u.values_mut().last_mut().unwrap() = 0.0;
    u
}

/// Norm additivity, gradient sub-additivity, the power identity and the
/// cross-term inequality of the two-function rearrangement.
pub fn rearrangement_suite(n: usize, quadruples: usize, seed: u64) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grids: Vec<_> = (1..=3).map(|d| RadialGrid::new(d, 16.0, n).expect("valid grid")).collect();
    let mut out = Vec::new();

    // smooth decreasing pairs; the trapezoid error in the L^p integrals is
    // O(h^2), so these few pairs get a 4x finer grid
    let fine: Vec<_> = (1..=3).map(|d| RadialGrid::new(d, 16.0, 4 * n).expect("valid grid")).collect();
    let pairs: Vec<(Profile, Profile)> = (0..20)
        .map(|k| {
            let g = &fine[k % 3];
            (random_profile(&mut rng, g, true), random_profile(&mut rng, g, true))
        })
        .collect();
    let mut add_err = 0.0f64;
    let mut grad_margin = f64::INFINITY;
    let mut power_dev = 0.0f64;
    for (u, v) in &pairs {
        let w = match shibata(u, v) {
            Ok(w) => w,
            Err(e) => return vec![PropertyResult::failed("rearrangement", e)],
        };
        for p in [2.0, 2.5, 4.0] {
            add_err = add_err.max(norm_additivity_defect(u, v, &w, p).abs());
        }
        let sum = u.grad_norm_sq() + v.grad_norm_sq();
        grad_margin = grad_margin.min((sum - w.grad_norm_sq()) / sum);
        for r in [1.5, 2.5] {
            if let Ok(rep) = shibata_power_identity_check(u, v, r) {
                power_dev = power_dev.max(rep.max_deviation);
            }
        }
    }
    out.push(PropertyResult::at_most(
        "rearrangement norm additivity, p in {2, 2.5, 4} (relative)",
        add_err,
        1e-4,
        json!({ "pairs": pairs.len(), "n": n }),
    ));
    out.push(PropertyResult {
        name: "rearrangement strict gradient sub-additivity (relative margin > 1e-3)".into(),
        passed: grad_margin > 1e-3,
        measured: grad_margin,
        bound: 1e-3,
        details: json!({ "pairs": pairs.len() }),
    });
    out.push(PropertyResult::at_most(
        "rearrangement power identity (relative sup)",
        power_dev,
        1e-4,
        json!({ "powers": [1.5, 2.5] }),
    ));

    // random quadruples, not necessarily monotone
    let draws: Vec<(usize, u64, f64, f64)> = (0..quadruples)
        .map(|_| (rng.gen_range(0..3usize), rng.gen(), rng.gen_range(1.1..3.0), rng.gen_range(1.1..3.0)))
        .collect();
    let results: Vec<std::result::Result<f64, String>> = draws
        .par_iter()
        .map(|&(gi, s, r1, r2)| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let g = &grids[gi];
            let mono = rng.gen_bool(0.5);
            let f: Vec<Profile> = (0..4).map(|_| random_profile(&mut rng, g, mono)).collect();
            cross_term_inequality_check(&f[0], &f[1], &f[2], &f[3], r1, r2)
                .map(|rep| rep.relative_slack)
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut worst = f64::INFINITY;
    let mut violations = 0usize;
    for r in results {
        match r {
            Ok(s) => {
                worst = worst.min(s);
                if s < -1e-6 {
                    violations += 1;
                }
            }
            Err(e) => return vec![PropertyResult::failed("cross-term inequality", e)],
        }
    }
    out.push(PropertyResult {
        name: "rearrangement cross-term inequality: violations beyond 1e-6".into(),
        passed: violations == 0,
        measured: violations as f64,
        bound: 0.0,
        details: json!({ "quadruples": quadruples, "worst_relative_slack": worst }),
    });
    out
}

/// Random fibering coefficients under H0 exponents satisfying
/// `pi <= r1 + r2 - 2/N` or `|p1 - p2| <= 2/N`.
fn fibering_draw(rng: &mut ChaCha8Rng) -> FiberingCoeffs {
    loop {
        let dim = rng.gen_range(1..=3usize);
        let n = dim as f64;
        let crit = mass_critical_exponent(dim);
        let p1 = rng.gen_range(2.0..crit);
        let p2 = rng.gen_range(2.0..crit);
        let s = rng.gen_range(crit..p_upper(dim));
        if !((p1 <= s - 2.0 / n && p2 <= s - 2.0 / n) || (p1 - p2).abs() <= 2.0 / n) {
            continue;
        }
        let mut coef = || 10f64.powf(rng.gen_range(-2.0..2.0));
        let e = |p: f64| (p / 2.0 - 1.0) * n;
        return FiberingCoeffs {
            a: coef(),
            b1: coef(),
            b2: coef(),
            c: coef(),
            e1: e(p1),
            e2: e(p2),
            e3: e(s),
        };
    }
}

/// Stationary-point count of the fibering map over random admissible draws,
/// by a dense sign scan and by the bisection locator.
pub fn fibering_sweep(draws: usize, dense: usize, seed: u64) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<FiberingCoeffs> = (0..draws).map(|_| fibering_draw(&mut rng)).collect();
    let counts: Vec<(usize, usize)> = coeffs
        .par_iter()
        .map(|c| match stationary_bracket(c) {
            None => (0, 0),
            Some((lo, hi)) => {
                let (lo, hi) = (lo / 1.01, hi * 1.01);
                (count_sign_changes_dense(c, lo, hi, dense), stationary_points(c, lo, hi, 4001).len())
            }
        })
        .collect();
    let max = counts.iter().map(|c| c.0.max(c.1)).max().unwrap_or(0);
    let mismatches = counts.iter().filter(|c| c.0 != c.1).count();
    let mut hist = [0usize; 4];
    for c in &counts {
        hist[c.0.min(3)] += 1;
    }
    PropertyResult::at_most(
        "fibering map stationary points (max count)",
        max as f64,
        2.0,
        json!({ "draws": draws, "dense_points": dense, "histogram_0_1_2_3plus": hist, "dense_vs_bisection_mismatches": mismatches }),
    )
}

/// `β0` on a 5×5 mass grid (nonincreasing in each mass) and along
/// `(a/k, a/k)` (growing as `k` grows).
pub fn threshold_monotonicity() -> Vec<PropertyResult> {
    let p = h0_params();
    let gn = match GnConstants::sharp_or_analytic(&p) {
        Ok(g) => g,
        Err(e) => return vec![PropertyResult::failed("threshold monotonicity", e)],
    };
    let b0 = |a1: f64, a2: f64| compute_thresholds(&p.with_masses(a1, a2), &gn).map(|k| k.beta0);
    let masses = [0.25, 0.5, 1.0, 2.0, 4.0];
    let mut table = vec![[0.0; 5]; 5];
    for (i, a1) in masses.iter().enumerate() {
        for (j, a2) in masses.iter().enumerate() {
            match b0(*a1, *a2) {
                Ok(v) => table[i][j] = v,
                Err(e) => return vec![PropertyResult::failed("threshold monotonicity", e)],
            }
        }
    }
    // largest relative increase along either mass direction
    let mut worst = f64::NEG_INFINITY;
    for i in 0..5 {
        for j in 0..5 {
            if i + 1 < 5 {
                worst = worst.max((table[i + 1][j] - table[i][j]) / table[i][j]);
            }
            if j + 1 < 5 {
                worst = worst.max((table[i][j + 1] - table[i][j]) / table[i][j]);
            }
        }
    }
    let ks = [1.0, 10.0, 100.0, 1000.0];
    let along: Vec<f64> = ks.iter().map(|k| b0(1.0 / k, 1.0 / k).unwrap_or(f64::NAN)).collect();
    let min_ratio = along.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min);
    vec![
        PropertyResult::at_most(
            "beta0 nonincreasing in each mass (max relative increase)",
            worst,
            1e-12,
            json!({ "masses": masses, "beta0": table }),
        ),
        PropertyResult {
            name: "beta0(a/k, a/k) grows by more than 2x per decade of k".into(),
            passed: min_ratio > 2.0,
            measured: min_ratio,
            bound: 2.0,
            details: json!({ "k": ks, "beta0": along }),
        },
    ]
}

/// `m(a) <= m(d) + m(a - d) + 2 tol` for random splits `d`.
pub fn subadditivity(params: &Params, constants: &GeometryConstants, splits: usize, seed: u64, opts: &SolverOptions) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds: Vec<(f64, f64)> = (0..splits)
        .map(|_| (rng.gen_range(0.1..0.9) * params.a1, rng.gen_range(0.1..0.9) * params.a2))
        .collect();
    let reports: Vec<_> = ds
        .par_iter()
        .map(|&(d1, d2)| subadditivity_check(params, constants, d1, d2, opts))
        .collect();
    let mut min_slack = f64::INFINITY;
    let mut rows = Vec::new();
    for r in reports {
        match r {
            Ok(r) => {
                min_slack = min_slack.min(r.slack);
                rows.push(json!(r));
            }
            Err(e) => return PropertyResult::failed("sub-additivity", e),
        }
    }
    PropertyResult {
        name: "sub-additivity m(a) <= m(d) + m(a-d) + 2 tol (min slack >= 0)".into(),
        passed: min_slack >= 0.0,
        measured: min_slack,
        bound: 0.0,
        details: json!(rows),
    }
}

/// Standing-wave consistency and the perturbation probe on the
/// one-dimensional configuration.
pub fn dynamics_checks(scale: &SuiteScale, seed: u64, opts: &SolverOptions) -> Vec<PropertyResult> {
    let rec = match probe_solution(opts, scale.dynamics_n) {
        Ok(r) => r,
        Err(e) => return vec![PropertyResult::failed("dynamics probe solution", e)],
    };
    let dt = probe_time_step(&rec, 200);
    let mut out = Vec::new();
    match standing_wave_probe(&rec, scale.standing_periods, dt) {
        Ok(sw) => {
            let d = json!(sw);
            out.push(PropertyResult::at_most("standing wave |Psi_i| stationary (relative sup)", sw.modulus_deviation, 1e-4, d.clone()));
            out.push(PropertyResult::at_most("standing wave phase rate vs -lambda_i (relative)", sw.phase_rate_error, 1e-2, d.clone()));
            out.push(PropertyResult::at_most("mass drift per unit time (relative)", sw.mass_drift_per_time, 1e-8, d));
        }
        Err(e) => out.push(PropertyResult::failed("standing wave", e)),
    }
    match stability_probe(&rec, 0.01, seed, scale.stability_time, dt, 1) {
        Ok(st) => out.push(PropertyResult::at_most(
            "1% perturbation: max orbital distance / initial",
            st.growth,
            5.0,
            json!(st),
        )),
        Err(e) => out.push(PropertyResult::failed("stability probe", e)),
    }
    out
}

/// Boundary bound and degree checks of the linking rectangle (H1).
pub fn linking_geometry_checks(params: &Params, constants: &GeometryConstants, deformations: usize, seed: u64, opts: &SolverOptions) -> Vec<PropertyResult> {
    let rep = linking_setup(params, constants, opts).and_then(|s| linking_geometry(&s, params, deformations, seed));
    let rep = match rep {
        Ok(r) => r,
        Err(e) => return vec![PropertyResult::failed("linking geometry", e)],
    };
    let found = rep.degree_checks.iter().filter(|c| c.zero.is_some()).count();
    vec![
        PropertyResult {
            name: "linking boundary: sup J on dM < max(l1, l2) + eps".into(),
            passed: rep.boundary_ok,
            measured: rep.boundary_sup,
            bound: rep.boundary_bound,
            details: json!({ "upper_bound": rep.upper_bound }),
        },
        PropertyResult {
            name: "linking degree check: interior zero on every deformation".into(),
            passed: rep.all_zeros_found && found == rep.degree_checks.len(),
            measured: found as f64,
            bound: rep.degree_checks.len() as f64,
            details: json!(rep.degree_checks),
        },
    ]
}

/// `Q(u)` against a central difference of `t -> J(u^t)` at `t = 1`.
pub fn pohozaev_derivative_check() -> PropertyResult {
    let (params, _) = match h0_config() {
        Ok(c) => c,
        Err(e) => return PropertyResult::failed("Q derivative", e),
    };
    let grid = RadialGrid::new(3, 16.0, 2049).expect("valid grid");
    let st = StatePair::new(
        Profile::from_fn(grid.clone(), |r| (-r * r / 2.0).exp()),
        Profile::from_fn(grid, |r| 0.5 * (-r * r / 3.0).exp()),
    )
    .expect("shared grid");
    let h = 1e-4;
    let jp = st.dilate_exact(1.0 + h).map(|s| energy(&s, &params));
    let jm = st.dilate_exact(1.0 - h).map(|s| energy(&s, &params));
    match (jp, jm) {
        (Ok(a), Ok(b)) => {
            let fd = (a - b) / (2.0 * h);
            let q = pohozaev(&st, &params);
            PropertyResult::at_most("Q equals d/dt J(u^t) at t=1 (relative)", rel(fd, q), 1e-6, json!({ "Q": q, "fd": fd }))
        }
        (Err(e), _) | (_, Err(e)) => PropertyResult::failed("Q derivative", e),
    }
}

/// Save/load round trip of a record (load re-validates residuals).
pub fn record_roundtrip(rec: &SolutionRecord, dir: &std::path::Path) -> PropertyResult {
    let res = rec.save(dir, "roundtrip").and_then(|p| SolutionRecord::load(&p));
    match res {
        Ok(back) => PropertyResult::at_most(
            "record save/load re-validates (energy relative difference)",
            rel(back.energy, rec.energy),
            1e-10,
            json!({ "energy": rec.energy }),
        ),
        Err(e) => PropertyResult::failed("record round trip", e),
    }
}

/// The full suite at the given scale.
pub fn property_suite(scale: &SuiteScale, seed: u64, opts: &SolverOptions, scratch: &std::path::Path) -> Vec<PropertyResult> {
    let mut out = Vec::new();
    out.extend(scalar_scaling_laws(scale.scalar_draws, seed));
    out.push(line_ground_states(&[3.0, 4.0, 5.0]));
    out.push(pohozaev_derivative_check());
    out.extend(rearrangement_suite(scale.rearrange_n, scale.rearrange_quadruples, seed));
    out.push(fibering_sweep(scale.fibering_draws, scale.fibering_dense, seed));
    out.extend(threshold_monotonicity());
    match h0_config() {
        Ok((p, k)) => {
            let (rows, pair) = certificate_checks("H0", &p, &k, opts);
            out.extend(rows);
            if let Some(pair) = pair {
                out.push(record_roundtrip(&pair.local, scratch));
            }
            out.push(subadditivity(&p, &k, scale.subadd_splits, seed, opts));
        }
        Err(e) => out.push(PropertyResult::failed("H0 configuration", e)),
    }
    match h1_config() {
        Ok((p, k)) => {
            out.extend(certificate_checks("H1", &p, &k, opts).0);
            out.extend(linking_geometry_checks(&p, &k, scale.degree_deformations, seed, opts));
        }
        Err(e) => out.push(PropertyResult::failed("H1 configuration", e)),
    }
    out.extend(dynamics_checks(scale, seed, opts));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_respect_the_exponent_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let c = fibering_draw(&mut rng);
            assert!(c.e1 < 2.0 && c.e2 < 2.0 && c.e3 > 2.0);
        }
    }

    #[test]
    fn small_fibering_sweep() {
        let r = fibering_sweep(200, 20_000, 1);
        assert!(r.passed, "{r:?}");
        assert_eq!(r.details["dense_vs_bisection_mismatches"], 0);
    }

    #[test]
    fn q_matches_derivative() {
        let r = pohozaev_derivative_check();
        assert!(r.passed, "{r:?}");
    }
}
