//! Time evolution of the coupled Schrödinger flow
//!
//! ```text
//! i ∂t Ψ1 = -ΔΨ1 - μ1 |Ψ1|^{p1-2} Ψ1 - β r1 |Ψ1|^{r1-2} Ψ1 |Ψ2|^{r2}
//! ```
//!
//! (and its partner) on a radial grid, by Strang splitting: exact phase
//! rotation for the nonlinear half-steps, Crank–Nicolson for the Laplacian.
//! Standing waves `e^{-iλt} u` of a solution record are stationary in modulus.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{SolutionRecord, StatePair};
use crate::error::{Error, Result};
use crate::grid::{Profile, RadialGrid};
use crate::linalg::ComplexTridiag;
use crate::model::{compute_thresholds, GnConstants, Params};
use crate::solvers::{initial_pair, local_minimize, SolverOptions};
use crate::solvers::newton::{newton_refine, NewtonOptions};

/// Sup-norm growth factor that aborts an evolution.
pub const BLOW_UP_FACTOR: f64 = 1e6;

/// A complex pair `(Ψ1, Ψ2)` on one radial grid.
#[derive(Debug, Clone)]
pub struct ComplexState {
    grid: Arc<RadialGrid>,
    pub psi: [Vec<Complex64>; 2],
}

impl ComplexState {
    pub fn from_real(state: &StatePair) -> Self {
        let lift = |u: &Profile| u.values().iter().map(|v| Complex64::new(*v, 0.0)).collect();
        Self {
            grid: state.grid().clone(),
            psi: [lift(&state.u1), lift(&state.u2)],
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// Real and imaginary parts of component `i`.
    pub fn parts(&self, i: usize) -> (Profile, Profile) {
        let re = self.psi[i].iter().map(|z| z.re).collect();
        let im = self.psi[i].iter().map(|z| z.im).collect();
        (
            Profile::from_raw(self.grid.clone(), re),
            Profile::from_raw(self.grid.clone(), im),
        )
    }

    pub fn modulus(&self, i: usize) -> Profile {
        Profile::from_raw(self.grid.clone(), self.psi[i].iter().map(|z| z.norm()).collect())
    }

    pub fn masses(&self) -> (f64, f64) {
        let m = |v: &[Complex64]| self.grid.integrate(&v.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>());
        (m(&self.psi[0]), m(&self.psi[1]))
    }

    fn dirichlet(&self, i: usize) -> f64 {
        let v = &self.psi[i];
        self.grid
            .flux()
            .iter()
            .enumerate()
            .map(|(j, f)| f * (v[j + 1] - v[j]).norm_sqr())
            .sum()
    }

    /// The conserved energy (the real functional evaluated with `|Ψi|`
    /// in the potential terms).
    pub fn energy(&self, params: &Params) -> f64 {
        let w = self.grid.weights();
        let mut pot = 0.0;
        for j in 0..w.len() {
            let a1 = self.psi[0][j].norm();
            let a2 = self.psi[1][j].norm();
            let mut f = params.mu1 / params.p1 * a1.powf(params.p1) + params.mu2 / params.p2 * a2.powf(params.p2);
            if a1 > 0.0 && a2 > 0.0 {
                f += params.beta * a1.powf(params.r1) * a2.powf(params.r2);
            }
            pot += w[j] * f;
        }
        0.5 * (self.dirichlet(0) + self.dirichlet(1)) - pot
    }

    /// Largest modulus; NaN if any value is NaN.
    pub fn sup_norm(&self) -> f64 {
        self.psi
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, |m, x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x) })
    }

    /// Multiplies component `i` by `e^{iθ}`.
    pub fn rotate(&mut self, i: usize, theta: f64) {
        let f = Complex64::from_polar(1.0, theta);
        for z in &mut self.psi[i] {
            *z *= f;
        }
    }
}

/// Crank–Nicolson propagator for `∂t Ψ = iΔΨ` over one step `dt`:
/// `(W + i dt/2 K) Ψ' = (W - i dt/2 K) Ψ`. Unitary in the `W` inner product,
/// so the discrete mass is conserved to rounding.
#[derive(Debug, Clone)]
pub struct LinearPropagator {
    grid: Arc<RadialGrid>,
    dt: f64,
    solver: ComplexTridiag,
}

impl LinearPropagator {
    pub fn new(grid: Arc<RadialGrid>, dt: f64) -> Result<Self> {
        let m = grid.len() - 1;
        let (w, flux) = (grid.weights(), grid.flux());
        let c = Complex64::new(0.0, 0.5 * dt);
        let mut lower = vec![Complex64::new(0.0, 0.0); m];
        let mut diag = vec![Complex64::new(0.0, 0.0); m];
        let mut upper = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..m {
            let left = if j > 0 { flux[j - 1] } else { 0.0 };
            diag[j] = w[j] + c * (left + flux[j]);
            if j > 0 {
                lower[j] = -c * flux[j - 1];
            }
            if j + 1 < m {
                upper[j] = -c * flux[j];
            }
        }
        let solver = ComplexTridiag::factor(&lower, &diag, &upper)?;
        Ok(Self { grid, dt, solver })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, psi: &mut [Complex64]) {
        let m = self.grid.len() - 1;
        let (w, flux) = (self.grid.weights(), self.grid.flux());
        let c = Complex64::new(0.0, 0.5 * self.dt);
        // rhs = (W - c K) psi over the interior unknowns
        let mut rhs: Vec<Complex64> = (0..m)
            .map(|j| {
                let mut k = Complex64::new(0.0, 0.0);
                if j > 0 {
                    k += flux[j - 1] * (psi[j] - psi[j - 1]);
                }
                k += flux[j] * (psi[j] - psi[j + 1]);
                w[j] * psi[j] - c * k
            })
            .collect();
        self.solver.solve(&mut rhs);
        psi[..m].copy_from_slice(&rhs);
        psi[m] = Complex64::new(0.0, 0.0);
    }
}

/// Exact nonlinear sub-flow over `tau`: `Ψi <- e^{i tau g_i(|Ψ1|,|Ψ2|)} Ψi`.
/// Nodes where a component vanishes are left unchanged (continuous
/// extension of `|Ψi|^{ri-2} Ψi` at 0).
pub fn nonlinear_step(state: &mut ComplexState, params: &Params, tau: f64) {
    let n = state.grid.len();
    for j in 0..n {
        let a1 = state.psi[0][j].norm();
        let a2 = state.psi[1][j].norm();
        let mut g1 = if a1 > 0.0 { params.mu1 * a1.powf(params.p1 - 2.0) } else { 0.0 };
        let mut g2 = if a2 > 0.0 { params.mu2 * a2.powf(params.p2 - 2.0) } else { 0.0 };
        if params.beta != 0.0 && a1 > 0.0 && a2 > 0.0 {
            g1 += params.beta * params.r1 * a1.powf(params.r1 - 2.0) * a2.powf(params.r2);
            g2 += params.beta * params.r2 * a2.powf(params.r2 - 2.0) * a1.powf(params.r1);
        }
        state.psi[0][j] *= Complex64::from_polar(1.0, tau * g1);
        state.psi[1][j] *= Complex64::from_polar(1.0, tau * g2);
    }
}

/// Per-step invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantSample {
    pub t: f64,
    pub mass1: f64,
    pub mass2: f64,
    pub energy: f64,
}

/// Result of [`evolve`]: snapshots every `stride` steps plus the full
/// invariants log.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ComplexState>,
    pub invariants_log: Vec<InvariantSample>,
}

impl Trajectory {
    /// Largest relative mass deviation from `t = 0`, per component.
    pub fn max_mass_drift(&self) -> f64 {
        let first = self.invariants_log[0];
        self.invariants_log
            .iter()
            .flat_map(|s| {
                [(s.mass1, first.mass1), (s.mass2, first.mass2)]
                    .into_iter()
                    .filter(|(_, m0)| *m0 > 0.0)
                    .map(|(m, m0)| ((m - m0) / m0).abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.invariants_log[0].energy;
        let scale = e0.abs().max(1e-300);
        self.invariants_log.iter().map(|s| (s.energy - e0).abs() / scale).fold(0.0, f64::max)
    }
}

fn sample(state: &ComplexState, params: &Params, t: f64) -> InvariantSample {
    let (mass1, mass2) = state.masses();
    InvariantSample {
        t,
        mass1,
        mass2,
        energy: state.energy(params),
    }
}

fn validate_step(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", "time step must be positive"));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::param("T", "final time must be nonnegative"));
    }
    Ok((t_end / dt).round() as usize)
}

/// Evolves `initial` to `t_end` with `round(t_end/dt)` Strang steps, calling
/// `observe(step, t, state)` after every step (and once at `t = 0`).
/// Aborts with [`Error::BlowUp`] if the sup norm grows by
/// [`BLOW_UP_FACTOR`].
pub fn evolve_with<F>(initial: &ComplexState, params: &Params, t_end: f64, dt: f64, mut observe: F) -> Result<ComplexState>
where
    F: FnMut(usize, f64, &ComplexState),
{
    let steps = validate_step(t_end, dt)?;
    let prop = LinearPropagator::new(initial.grid.clone(), dt)?;
    let mut st = initial.clone();
    let sup0 = st.sup_norm();
    if !sup0.is_finite() {
        return Err(Error::BlowUp { time: 0.0, sup: sup0 });
    }
    let sup0 = sup0.max(1e-300);
    observe(0, 0.0, &st);
    for k in 1..=steps {
        nonlinear_step(&mut st, params, 0.5 * dt);
        prop.apply(&mut st.psi[0]);
        prop.apply(&mut st.psi[1]);
        nonlinear_step(&mut st, params, 0.5 * dt);
        let t = k as f64 * dt;
        let sup = st.sup_norm();
        if !(sup.is_finite() && sup <= BLOW_UP_FACTOR * sup0) {
            return Err(Error::BlowUp { time: t, sup });
        }
        observe(k, t, &st);
    }
    Ok(st)
}

/// Evolves and records invariants every step and snapshots every `stride`
/// steps.
pub fn evolve(initial: &ComplexState, params: &Params, t_end: f64, dt: f64, stride: usize) -> Result<Trajectory> {
    let stride = stride.max(1);
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        invariants_log: Vec::new(),
    };
    evolve_with(initial, params, t_end, dt, |k, t, st| {
        traj.invariants_log.push(sample(st, params, t));
        if k % stride == 0 {
            traj.times.push(t);
            traj.states.push(st.clone());
        }
    })?;
    Ok(traj)
}

/// Distance from `state` to the phase orbit `{(e^{iθ1} v1, e^{iθ2} v2)}` of
/// the reference profiles in the `H^1` pair norm, with the closed-form
/// optimal phase per component. Spatial translations are not represented on
/// a radial grid, so this bounds the distance to the full orbit from above.
pub fn orbital_distance(state: &ComplexState, reference: &SolutionRecord) -> Result<f64> {
    let g = &state.grid;
    if **g != **reference.state.grid() {
        return Err(Error::GridMismatch("state and reference are on different grids".into()));
    }
    let (w, flux) = (g.weights(), g.flux());
    let mut total = 0.0;
    for i in 0..2 {
        let v = reference.state.component(i).values();
        let psi = &state.psi[i];
        // <psi, v>_{H^1}; the optimal rotation of v is its argument
        let mut z = Complex64::new(0.0, 0.0);
        for j in 0..w.len() {
            z += w[j] * psi[j] * v[j];
        }
        for j in 0..flux.len() {
            z += flux[j] * (psi[j + 1] - psi[j]) * (v[j + 1] - v[j]);
        }
        let rot = if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) };
        let d: Vec<Complex64> = psi.iter().zip(v).map(|(p, v)| p - rot * v).collect();
        let l2: f64 = w.iter().zip(&d).map(|(w, d)| w * d.norm_sqr()).sum();
        let h1: f64 = flux.iter().enumerate().map(|(j, f)| f * (d[j + 1] - d[j]).norm_sqr()).sum();
        total += l2 + h1;
    }
    Ok(total.sqrt())
}

/// Mass-preserving relative perturbation `u_i (1 + rel ξ_i)` with `ξ_i` a
/// random smooth bump of sup norm 1, renormalized to the original masses.
pub fn perturb(state: &StatePair, rel: f64, seed: u64) -> Result<StatePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = state.grid().r_max();
    let mut out = state.clone();
    let (m1, m2) = state.masses();
    for c in 0..2 {
        let centers: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.gen_range(0.0..0.1 * scale),
                    rng.gen_range(0.02..0.1) * scale,
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let xi: Vec<f64> = state
            .grid()
            .nodes()
            .iter()
            .map(|r| centers.iter().map(|(c, s, a)| a * (-((r - c) / s).powi(2)).exp()).sum())
            .collect();
        let sup = xi.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        for (u, x) in out.component_mut(c).values_mut().iter_mut().zip(&xi) {
            *u *= 1.0 + rel * x / sup;
        }
    }
    out.normalize_masses(m1, m2)?;
    Ok(out)
}

/// Standing-wave consistency of a solution record under the flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandingWaveReport {
    pub t_end: f64,
    pub dt: f64,
    /// `sup_t sup_r ||Ψi| - ui| / sup ui`, worst component.
    pub modulus_deviation: f64,
    /// Fitted phase rotation rates at the profile peak.
    pub phase_rate: (f64, f64),
    /// `|rate_i + λi| / |λi|`, worst component.
    pub phase_rate_error: f64,
    /// Worst relative mass deviation divided by `t_end`.
    pub mass_drift_per_time: f64,
    pub energy_drift: f64,
}

/// Step for [`standing_wave_probe`]: `steps_per_period` steps per period of
/// the faster component, capped by [`stable_time_step`] at half the bound.
pub fn probe_time_step(rec: &SolutionRecord, steps_per_period: usize) -> f64 {
    let fast = rec.lambda1.abs().max(rec.lambda2.abs()).max(1e-300);
    let by_period = 2.0 * std::f64::consts::PI / fast / steps_per_period.max(1) as f64;
    by_period.min(stable_time_step(&rec.state, &rec.params, 0.5))
}

/// Evolves `(u1, u2)` for `periods` periods `2π / |λi|` of the slower
/// component with step `dt`, tracking `|Ψi|` and the phase at the peak.
pub fn standing_wave_probe(rec: &SolutionRecord, periods: f64, dt: f64) -> Result<StandingWaveReport> {
    let lams = [rec.lambda1, rec.lambda2];
    let active: Vec<usize> = (0..2).filter(|&i| rec.state.component(i).sup_norm() > 0.0).collect();
    let slow = active.iter().map(|&i| lams[i].abs()).fold(f64::INFINITY, f64::min);
    if !(slow > 0.0 && slow.is_finite()) {
        return Err(Error::Geometry("standing wave needs nonzero multipliers".into()));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let t_end = periods * two_pi / slow;
    let init = ComplexState::from_real(&rec.state);
    let refs: Vec<(f64, usize)> = (0..2)
        .map(|i| {
            let v = rec.state.component(i).values();
            let (j, m) = v.iter().enumerate().fold((0, 0.0), |b, (j, x)| if *x > b.1 { (j, *x) } else { b });
            (m, j)
        })
        .collect();
    let mut dev = 0.0f64;
    // unwrapped phase at the peak node, with running least-squares sums
    let mut phase = [0.0f64; 2];
    let mut last = [0.0f64; 2];
    let mut sums = [[0.0f64; 4]; 2];
    let (m10, m20) = init.masses();
    let e0 = init.energy(&rec.params);
    let mut mass_dev = 0.0f64;
    let mut energy_dev = 0.0f64;
    evolve_with(&init, &rec.params, t_end, dt, |_, t, st| {
        for &i in &active {
            let v = rec.state.component(i).values();
            let d = st.psi[i].iter().zip(v).map(|(z, u)| (z.norm() - u).abs()).fold(0.0, f64::max);
            dev = dev.max(d / refs[i].0);
            let arg = st.psi[i][refs[i].1].arg();
            let mut delta = arg - last[i];
            delta -= two_pi * (delta / two_pi).round();
            phase[i] += delta;
            last[i] = arg;
            let s = &mut sums[i];
            s[0] += t;
            s[1] += phase[i];
            s[2] += t * t;
            s[3] += t * phase[i];
        }
        let (m1, m2) = st.masses();
        for (m, m0) in [(m1, m10), (m2, m20)] {
            if m0 > 0.0 {
                mass_dev = mass_dev.max(((m - m0) / m0).abs());
            }
        }
        energy_dev = energy_dev.max((st.energy(&rec.params) - e0).abs() / e0.abs().max(1e-300));
    })?;
    let count = (t_end / dt).round() + 1.0;
    let mut rates = [0.0; 2];
    let mut err = 0.0f64;
    for &i in &active {
        let s = sums[i];
        rates[i] = (count * s[3] - s[0] * s[1]) / (count * s[2] - s[0] * s[0]);
        err = err.max((rates[i] + lams[i]).abs() / lams[i].abs());
    }
    Ok(StandingWaveReport {
        t_end,
        dt,
        modulus_deviation: dev,
        phase_rate: (rates[0], rates[1]),
        phase_rate_error: err,
        mass_drift_per_time: if t_end > 0.0 { mass_dev / t_end } else { 0.0 },
        energy_drift: energy_dev,
    })
}

/// The record re-solved on a grid with the same radius and `n` nodes (a
/// discrete standing wave of that grid, so the flow on it is stationary up
/// to the time-stepping error).
pub fn refine_on_grid(rec: &SolutionRecord, n: usize) -> Result<SolutionRecord> {
    let grid = RadialGrid::new(rec.params.dim, rec.state.grid().r_max(), n)?;
    if *grid == **rec.state.grid() {
        return Ok(rec.clone());
    }
    let start = rec.state.resample(&grid)?;
    let out = newton_refine(&start, &rec.params, (rec.lambda1, rec.lambda2), &NewtonOptions::default())?;
    let mut state = out.state;
    let removed = state.clip_negative();
    state.normalize_masses(rec.params.a1, rec.params.a2)?;
    Ok(SolutionRecord::from_state(
        state,
        rec.params,
        rec.constants,
        rec.classification,
        rec.iterations + out.iterations,
        rec.projection_magnitude.max(removed),
    ))
}

/// Largest nonlinear phase speed `g_i` over the grid for the given profiles.
pub fn max_phase_speed(state: &StatePair, params: &Params) -> f64 {
    let mut st = ComplexState::from_real(state);
    let mut g = 0.0f64;
    // one unit nonlinear step rotates each node by exactly g_i
    let before = st.clone();
    nonlinear_step(&mut st, params, 1e-3);
    for i in 0..2 {
        for (a, b) in st.psi[i].iter().zip(&before.psi[i]) {
            if b.norm() > 0.0 {
                g = g.max((a / b).arg().abs() * 1e3);
            }
        }
    }
    g
}

/// Time step avoiding the grid-scale resonance of the split scheme:
/// Crank–Nicolson rotates all near-Nyquist modes by almost `π`, and pairs of
/// them resonate with the nonlinear phase unless
/// `dt^2 ω_max g_max < 4` with `ω_max ≈ 4/h²`; `safety` scales the bound.
pub fn stable_time_step(state: &StatePair, params: &Params, safety: f64) -> f64 {
    let h = state.grid().spacing();
    let g = max_phase_speed(state, params).max(1e-300);
    safety * h / g.sqrt()
}

/// Orbital-distance evidence for a perturbed minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub perturbation: f64,
    pub t_end: f64,
    pub dt: f64,
    pub initial_distance: f64,
    pub max_distance: f64,
    /// `max_distance / initial_distance`.
    pub growth: f64,
    pub mass_drift: f64,
    pub energy_drift: f64,
}

/// Evolves a mass-preserving `rel` perturbation of `rec` to `t_end` and
/// tracks the orbital distance every `stride` steps.
pub fn stability_probe(rec: &SolutionRecord, rel: f64, seed: u64, t_end: f64, dt: f64, stride: usize) -> Result<StabilityReport> {
    let init = ComplexState::from_real(&perturb(&rec.state, rel, seed)?);
    let d0 = orbital_distance(&init, rec)?;
    let mut dmax = d0;
    let (m10, m20) = init.masses();
    let e0 = init.energy(&rec.params);
    let mut mass_dev = 0.0f64;
    let mut energy_dev = 0.0f64;
    let stride = stride.max(1);
    let mut failure = None;
    evolve_with(&init, &rec.params, t_end, dt, |k, _, st| {
        if k % stride == 0 {
            match orbital_distance(st, rec) {
                Ok(d) => dmax = dmax.max(d),
                Err(e) => failure = Some(e),
            }
        }
        let (m1, m2) = st.masses();
        for (m, m0) in [(m1, m10), (m2, m20)] {
            if m0 > 0.0 {
                mass_dev = mass_dev.max(((m - m0) / m0).abs());
            }
        }
        energy_dev = energy_dev.max((st.energy(&rec.params) - e0).abs() / e0.abs().max(1e-300));
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(StabilityReport {
        perturbation: rel,
        t_end,
        dt,
        initial_distance: d0,
        max_distance: dmax,
        growth: dmax / d0.max(1e-300),
        mass_drift: mass_dev,
        energy_drift: energy_dev,
    })
}

/// The one-dimensional probe configuration: `N = 1`, `p1 = p2 = 4`,
/// `r1 = r2 = 3.5` (so that `r1 + r2 > 6` is mass-supercritical),
/// unit masses and strengths, `β` to be set from the threshold.
pub fn probe_params() -> Params {
    Params {
        dim: 1,
        p1: 4.0,
        p2: 4.0,
        r1: 3.5,
        r2: 3.5,
        mu1: 1.0,
        mu2: 1.0,
        beta: 0.0,
        a1: 1.0,
        a2: 1.0,
    }
}

/// Local minimizer of the probe configuration at `β = β0/2`, re-solved on a
/// `dynamics_n`-node grid for time stepping.
pub fn probe_solution(opts: &SolverOptions, dynamics_n: usize) -> Result<SolutionRecord> {
    let p = probe_params();
    let gn = GnConstants::sharp_or_analytic(&p)?;
    let beta0 = compute_thresholds(&p, &gn)?.beta0;
    let p = p.with_beta(0.5 * beta0);
    let k = compute_thresholds(&p, &gn)?;
    let init = initial_pair(&p, &k, opts)?;
    let rec = local_minimize(&p, &k, &init, opts)?;
    refine_on_grid(&rec, dynamics_n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Classification;

    fn gaussian_state(grid: &Arc<RadialGrid>) -> ComplexState {
        let u = Profile::from_fn(grid.clone(), |r| (-r * r / 2.0).exp());
        ComplexState::from_real(&StatePair::new(u.clone(), u.scaled(0.5)).unwrap())
    }

    #[test]
    fn free_gaussian_matches_closed_form() {
        let grid = RadialGrid::new(3, 30.0, 3001).unwrap();
        let mut st = gaussian_state(&grid);
        let (t_end, dt) = (1.0, 1e-3);
        let prop = LinearPropagator::new(grid.clone(), dt).unwrap();
        for _ in 0..(t_end / dt) as usize {
            prop.apply(&mut st.psi[0]);
        }
        // sigma = 1 + 2 i t
        let sigma = Complex64::new(1.0, 2.0 * t_end);
        let err = grid
            .nodes()
            .iter()
            .zip(&st.psi[0])
            .map(|(r, z)| (sigma.powf(-1.5) * (-r * r / (2.0 * sigma)).exp() - z).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "err {err:e}");
    }

    #[test]
    fn mass_is_conserved_and_energy_nearly() {
        let grid = RadialGrid::new(3, 20.0, 801).unwrap();
        let params = Params {
            dim: 3,
            p1: 2.5,
            p2: 2.5,
            r1: 2.0,
            r2: 2.0,
            mu1: 1.0,
            mu2: 1.0,
            beta: 0.5,
            a1: 1.0,
            a2: 1.0,
        };
        let traj = evolve(&gaussian_state(&grid), &params, 2.0, 1e-3, 500).unwrap();
        assert_eq!(traj.states.len(), 5);
        assert!(traj.max_mass_drift() < 1e-12, "{:e}", traj.max_mass_drift());
        assert!(traj.max_energy_drift() < 1e-5, "{:e}", traj.max_energy_drift());
    }

    #[test]
    fn orbit_distance_ignores_phase() {
        let grid = RadialGrid::new(1, 20.0, 401).unwrap();
        let params = probe_params();
        let u = Profile::from_fn(grid.clone(), |r| 1.0 / r.cosh());
        let state = StatePair::new(u.clone(), u.scaled(0.7)).unwrap();
        let k = compute_thresholds(&params, &GnConstants::analytic(&params).unwrap()).unwrap();
        let rec = SolutionRecord::from_state(state.clone(), params, k, Classification::LocalMin, 0, 0.0);
        let mut z = ComplexState::from_real(&state);
        assert_eq!(orbital_distance(&z, &rec).unwrap(), 0.0);
        z.rotate(0, 1.3);
        z.rotate(1, -2.9);
        assert!(orbital_distance(&z, &rec).unwrap() < 1e-10);
        let p = ComplexState::from_real(&perturb(&state, 0.01, 3).unwrap());
        let d = orbital_distance(&p, &rec).unwrap();
        assert!(d > 1e-4 && d < 0.05, "{d}");
        let masses = p.masses();
        assert!(((masses.0 - u.mass()) / u.mass()).abs() < 1e-12);
    }

    #[test]
    fn blow_up_is_reported() {
        let grid = RadialGrid::new(1, 10.0, 201).unwrap();
        let mut st = gaussian_state(&grid);
        st.psi[0][0] = Complex64::new(f64::NAN, 0.0);
        let err = evolve(&st, &probe_params(), 0.01, 1e-3, 1).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }));
    }
}
