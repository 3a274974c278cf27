//! The energy functional, its Pohozaev (dilation-derivative) functional, the
//! unconstrained gradient, Lagrange multipliers and residual measures.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{mixed_term, Profile, RadialGrid};
use crate::linalg::solve_tridiagonal;
use crate::model::{GeometryConstants, Params};

/// A pair of radial profiles on one grid.
#[derive(Debug, Clone)]
pub struct StatePair {
    pub u1: Profile,
    pub u2: Profile,
}

impl StatePair {
    pub fn new(u1: Profile, u2: Profile) -> Result<Self> {
        if !(Arc::ptr_eq(u1.grid(), u2.grid()) || **u1.grid() == **u2.grid()) {
            return Err(Error::GridMismatch("state components on different grids".into()));
        }
        let u2 = Profile::from_raw(u1.grid().clone(), u2.into_values());
        Ok(Self { u1, u2 })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        Self {
            u1: Profile::zeros(grid.clone()),
            u2: Profile::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.u1.grid()
    }

    pub fn component(&self, i: usize) -> &Profile {
        if i == 0 {
            &self.u1
        } else {
            &self.u2
        }
    }

    pub fn component_mut(&mut self, i: usize) -> &mut Profile {
        if i == 0 {
            &mut self.u1
        } else {
            &mut self.u2
        }
    }

    pub fn masses(&self) -> (f64, f64) {
        (self.u1.mass(), self.u2.mass())
    }

    /// `||grad u1||^2 + ||grad u2||^2`.
    pub fn kinetic(&self) -> f64 {
        self.u1.grad_norm_sq() + self.u2.grad_norm_sq()
    }

    /// Rescales each component to the prescribed mass; a zero target zeroes
    /// the component.
    pub fn normalize_masses(&mut self, a1: f64, a2: f64) -> Result<()> {
        for (i, a) in [a1, a2].into_iter().enumerate() {
            let u = self.component_mut(i);
            if a == 0.0 {
                u.scale(0.0);
                continue;
            }
            let m = u.mass();
            if m <= 0.0 {
                return Err(Error::ZeroMass(i + 1));
            }
            u.scale((a / m).sqrt());
        }
        Ok(())
    }

    /// Sets negative nodal values (and the Dirichlet node) to zero; returns
    /// the largest magnitude removed.
    pub fn clip_negative(&mut self) -> f64 {
        let mut removed = 0.0f64;
        for i in 0..2 {
            let v = self.component_mut(i).values_mut();
            for x in v.iter_mut() {
                if *x < 0.0 {
                    removed = removed.max(-*x);
                    *x = 0.0;
                }
            }
            *v.last_mut().unwrap() = 0.0;
        }
        removed
    }

    /// Exact dilation `t^{N/2} u(t r)` on the grid scaled by `1/t`.
    pub fn dilate_exact(&self, t: f64) -> Result<StatePair> {
        let u1 = self.u1.dilate_exact(t)?;
        let u2 = Profile::from_raw(u1.grid().clone(), self.u2.dilate_exact(t)?.into_values());
        Ok(StatePair { u1, u2 })
    }

    /// Dilation resampled onto the current grid.
    pub fn dilate(&self, t: f64) -> Result<StatePair> {
        StatePair::new(
            crate::grid::dilate_profile(&self.u1, t)?,
            crate::grid::dilate_profile(&self.u2, t)?,
        )
    }

    pub fn resample(&self, grid: &Arc<RadialGrid>) -> Result<StatePair> {
        StatePair::new(self.u1.resample(grid)?, self.u2.resample(grid)?)
    }

    pub fn min_value(&self) -> f64 {
        self.u1
            .values()
            .iter()
            .chain(self.u2.values())
            .fold(f64::INFINITY, |m, v| m.min(*v))
    }
}

/// The five integrals entering the energy, plus the masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integrals {
    pub grad1: f64,
    pub grad2: f64,
    pub lp1: f64,
    pub lp2: f64,
    pub cross: f64,
    pub mass1: f64,
    pub mass2: f64,
}

impl Integrals {
    pub fn of(state: &StatePair, params: &Params) -> Self {
        Self {
            grad1: state.u1.grad_norm_sq(),
            grad2: state.u2.grad_norm_sq(),
            lp1: state.u1.lp_integral(params.p1),
            lp2: state.u2.lp_integral(params.p2),
            cross: mixed_term(&state.u1, &state.u2, params.r1, params.r2)
                .expect("state components share a grid"),
            mass1: state.u1.mass(),
            mass2: state.u2.mass(),
        }
    }

    pub fn energy(&self, params: &Params) -> f64 {
        0.5 * (self.grad1 + self.grad2)
            - params.mu1 / params.p1 * self.lp1
            - params.mu2 / params.p2 * self.lp2
            - params.beta * self.cross
    }

    pub fn pohozaev(&self, params: &Params) -> f64 {
        let (e1, e2, e3) = params.dilation_exponents();
        self.grad1 + self.grad2
            - params.mu1 / params.p1 * e1 * self.lp1
            - params.mu2 / params.p2 * e2 * self.lp2
            - params.beta * e3 * self.cross
    }

    /// Energy of the dilated pair `(u1^t, u2^t)` in closed form.
    pub fn energy_dilated(&self, params: &Params, t: f64) -> f64 {
        let (e1, e2, e3) = params.dilation_exponents();
        0.5 * t * t * (self.grad1 + self.grad2)
            - params.mu1 / params.p1 * t.powf(e1) * self.lp1
            - params.mu2 / params.p2 * t.powf(e2) * self.lp2
            - params.beta * t.powf(e3) * self.cross
    }
}

/// `J(u1, u2)`.
pub fn energy(state: &StatePair, params: &Params) -> f64 {
    Integrals::of(state, params).energy(params)
}

/// `Q(u1, u2) = d/dt J(u1^t, u2^t) |_{t=1}`.
pub fn pohozaev(state: &StatePair, params: &Params) -> f64 {
    Integrals::of(state, params).pohozaev(params)
}

/// `sign(u) |u|^{e}`, zero at `u = 0` (continuous for `e > 0`).
#[inline]
pub(crate) fn signed_pow(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.signum() * u.abs().powf(e)
    }
}

/// Nodal nonlinear forces `f_i = dF/du_i`:
/// `mu1 |u1|^{p1-2} u1 + beta r1 |u1|^{r1-2} u1 |u2|^{r2}` and its partner.
pub(crate) fn forces(params: &Params, u1: f64, u2: f64) -> (f64, f64) {
    let a1 = u1.abs();
    let a2 = u2.abs();
    let mut f1 = params.mu1 * signed_pow(u1, params.p1 - 1.0);
    let mut f2 = params.mu2 * signed_pow(u2, params.p2 - 1.0);
    if params.beta != 0.0 && a1 > 0.0 && a2 > 0.0 {
        f1 += params.beta * params.r1 * signed_pow(u1, params.r1 - 1.0) * a2.powf(params.r2);
        f2 += params.beta * params.r2 * signed_pow(u2, params.r2 - 1.0) * a1.powf(params.r1);
    }
    (f1, f2)
}

/// Unconstrained `L^2` gradient of `J`, as a pair of nodal profiles
/// (zero at the Dirichlet node).
pub fn gradient(state: &StatePair, params: &Params) -> StatePair {
    let grid = state.grid().clone();
    let n = grid.len();
    let mut g1 = vec![0.0; n];
    let mut g2 = vec![0.0; n];
    grid.stiffness_apply(state.u1.values(), &mut g1);
    grid.stiffness_apply(state.u2.values(), &mut g2);
    let w = grid.weights();
    let (v1, v2) = (state.u1.values(), state.u2.values());
    for j in 0..n - 1 {
        let (f1, f2) = forces(params, v1[j], v2[j]);
        g1[j] = g1[j] / w[j] - f1;
        g2[j] = g2[j] / w[j] - f2;
    }
    g1[n - 1] = 0.0;
    g2[n - 1] = 0.0;
    StatePair {
        u1: Profile::from_raw(grid.clone(), g1),
        u2: Profile::from_raw(grid, g2),
    }
}

/// Component-wise Rayleigh quotients `lambda_i = <grad_i J, u_i> / |u_i|_2^2`.
pub fn lagrange_multipliers(state: &StatePair, params: &Params) -> Result<(f64, f64)> {
    let g = gradient(state, params);
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let m = state.component(i).mass();
        if m <= 0.0 {
            return Err(Error::ZeroMass(i + 1));
        }
        *o = crate::grid::inner(g.component(i), state.component(i))? / m;
    }
    Ok((out[0], out[1]))
}

/// Multipliers, with `0` for a vanishing component.
pub(crate) fn multipliers_lenient(state: &StatePair, g: &StatePair) -> (f64, f64) {
    let lam = |i: usize| {
        let m = state.component(i).mass();
        if m <= 0.0 {
            0.0
        } else {
            crate::grid::inner(g.component(i), state.component(i)).unwrap() / m
        }
    };
    (lam(0), lam(1))
}

/// Shift `sigma` of the `H^1` metric `sigma |u|^2 + |grad u|^2` used to
/// measure residuals; scales like the kinetic energy per unit mass.
pub(crate) fn metric_shift(state: &StatePair) -> f64 {
    let (m1, m2) = state.masses();
    let m = m1 + m2;
    if m <= 0.0 {
        1.0
    } else {
        (state.kinetic() / m).max(1e-300)
    }
}

/// Applies `(sigma W + K)^{-1} W` to `r` on the interior nodes.
pub(crate) fn precondition(grid: &RadialGrid, sigma: f64, r: &[f64]) -> Vec<f64> {
    let n = grid.len() - 1;
    let w = grid.weights();
    let flux = grid.flux();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for j in 0..n {
        diag[j] = sigma * w[j] + flux[j] + if j > 0 { flux[j - 1] } else { 0.0 };
        if j > 0 {
            lower[j] = -flux[j - 1];
        }
        if j + 1 < n {
            upper[j] = -flux[j];
        }
    }
    let mut rhs: Vec<f64> = (0..n).map(|j| w[j] * r[j]).collect();
    solve_tridiagonal(&lower, &diag, &upper, &mut rhs).expect("shifted stiffness is SPD");
    rhs.push(0.0);
    rhs
}

/// Relative residuals of a candidate critical point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub lambda1: f64,
    pub lambda2: f64,
    pub energy: f64,
    /// `|Q| / (|grad u1|^2 + |grad u2|^2)`.
    pub pohozaev: f64,
    /// Dual (`H^{-1}`-type) norm of `grad J - lambda u` relative to the
    /// `H^1` norm of the state, both in the metric `sigma |.|^2 + |grad .|^2`.
    pub grad: f64,
}

pub fn residuals(state: &StatePair, params: &Params) -> Residuals {
    let ints = Integrals::of(state, params);
    let g = gradient(state, params);
    let (l1, l2) = multipliers_lenient(state, &g);
    let grid = state.grid();
    let sigma = metric_shift(state);
    let mut num = 0.0;
    for (i, lam) in [l1, l2].into_iter().enumerate() {
        let u = state.component(i).values();
        let r: Vec<f64> = g
            .component(i)
            .values()
            .iter()
            .zip(u)
            .map(|(gi, ui)| gi - lam * ui)
            .collect();
        let z = precondition(grid, sigma, &r);
        num += grid
            .weights()
            .iter()
            .zip(r.iter().zip(&z))
            .map(|(w, (a, b))| w * a * b)
            .sum::<f64>();
    }
    let den = sigma * (ints.mass1 + ints.mass2) + ints.grad1 + ints.grad2;
    let kin = ints.grad1 + ints.grad2;
    Residuals {
        lambda1: l1,
        lambda2: l2,
        energy: ints.energy(params),
        pohozaev: if kin > 0.0 { ints.pohozaev(params).abs() / kin } else { 0.0 },
        grad: if den > 0.0 { (num.max(0.0) / den).sqrt() } else { 0.0 },
    }
}

/// Which variational construction produced a critical point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    LocalMin,
    MountainPass,
    Linking,
}

/// A converged critical point and its certificates.
#[derive(Debug, Clone)]
pub struct SolutionRecord {
    pub state: StatePair,
    pub lambda1: f64,
    pub lambda2: f64,
    pub energy: f64,
    pub pohozaev_residual: f64,
    pub grad_residual: f64,
    pub classification: Classification,
    pub params: Params,
    pub constants: GeometryConstants,
    /// Largest negative part removed by the positivity projection.
    pub projection_magnitude: f64,
    pub iterations: usize,
}

impl SolutionRecord {
    pub fn from_state(
        state: StatePair,
        params: Params,
        constants: GeometryConstants,
        classification: Classification,
        iterations: usize,
        projection_magnitude: f64,
    ) -> Self {
        let res = residuals(&state, &params);
        Self {
            state,
            lambda1: res.lambda1,
            lambda2: res.lambda2,
            energy: res.energy,
            pohozaev_residual: res.pohozaev,
            grad_residual: res.grad,
            classification,
            params,
            constants,
            projection_magnitude,
            iterations,
        }
    }

    pub fn kinetic(&self) -> f64 {
        self.state.kinetic()
    }

    /// Checks the residual bounds and the sign conditions expected of every
    /// critical point.
    pub fn certify(&self, tol: f64) -> Result<()> {
        let fail = |m: String| Err(Error::NoConvergence {
            context: m,
            iterations: self.iterations,
            residual: self.grad_residual.max(self.pohozaev_residual),
        });
        if self.grad_residual > tol {
            return fail(format!("gradient residual {:e} > {tol:e}", self.grad_residual));
        }
        if self.pohozaev_residual > tol {
            return fail(format!("Pohozaev residual {:e} > {tol:e}", self.pohozaev_residual));
        }
        let (a1, a2) = (self.params.a1, self.params.a2);
        if self.lambda1 * a1 + self.lambda2 * a2 >= 0.0 {
            return fail("multiplier combination lambda1 a1 + lambda2 a2 is not negative".into());
        }
        Ok(())
    }

    /// Writes `<stem>.json` plus `<stem>_u1.bin`, `<stem>_u2.bin` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let f1 = format!("{stem}_u1.bin");
        let f2 = format!("{stem}_u2.bin");
        self.state.u1.write_binary(&dir.join(&f1))?;
        self.state.u2.write_binary(&dir.join(&f2))?;
        let json = RecordJson {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            energy: self.energy,
            q_residual: self.pohozaev_residual,
            grad_residual: self.grad_residual,
            classification: self.classification,
            params: self.params,
            constants: self.constants,
            profiles: ProfileRefs { u1: f1, u2: f2 },
            kinetic: self.kinetic(),
            projection_magnitude: self.projection_magnitude,
            iterations: self.iterations,
            metadata: RecordMetadata::default(),
        };
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&json)?)?;
        Ok(path)
    }

    /// Loads a record and re-validates it: recomputed residuals and energy
    /// must match the stored values.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let json: RecordJson = serde_json::from_str(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let u1 = Profile::read_binary(&dir.join(&json.profiles.u1))?;
        let u2 = Profile::read_binary(&dir.join(&json.profiles.u2))?;
        let state = StatePair::new(u1, u2)?;
        let rec = SolutionRecord::from_state(
            state,
            json.params,
            json.constants,
            json.classification,
            json.iterations,
            json.projection_magnitude,
        );
        // residuals are differences of O(1) terms, hence the absolute floor
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(b.abs()) + 1e-12 || a == b;
        for (name, stored, fresh) in [
            ("energy", json.energy, rec.energy),
            ("lambda1", json.lambda1, rec.lambda1),
            ("lambda2", json.lambda2, rec.lambda2),
            ("Q_residual", json.q_residual, rec.pohozaev_residual),
            ("grad_residual", json.grad_residual, rec.grad_residual),
        ] {
            if !close(stored, fresh) {
                return Err(Error::Config {
                    line: None,
                    message: format!(
                        "{}: stored {name} {stored:e} does not match recomputed {fresh:e}",
                        path.display()
                    ),
                });
            }
        }
        Ok(rec)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRefs {
    u1: String,
    u2: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordMetadata {
    gradient_extension: String,
    holder_split: String,
}

impl Default for RecordMetadata {
    fn default() -> Self {
        Self {
            gradient_extension: "|u|^{r-2}u := sign(u)|u|^{r-1}, 0 at u=0".into(),
            holder_split: "q = (r1+r2)/r1 (choice-dependent constants)".into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordJson {
    lambda1: f64,
    lambda2: f64,
    energy: f64,
    #[serde(rename = "Q_residual")]
    q_residual: f64,
    grad_residual: f64,
    classification: Classification,
    params: Params,
    constants: GeometryConstants,
    profiles: ProfileRefs,
    kinetic: f64,
    projection_magnitude: f64,
    iterations: usize,
    metadata: RecordMetadata,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params() -> Params {
        Params {
            dim: 1,
            p1: 4.0,
            p2: 4.0,
            r1: 2.0,
            r2: 2.0,
            mu1: 1.0,
            mu2: 1.5,
            beta: 0.7,
            a1: 1.0,
            a2: 1.0,
        }
    }

    fn gauss_pair(grid: &Arc<RadialGrid>) -> StatePair {
        StatePair::new(
            Profile::from_fn(grid.clone(), |r| (-r * r / 2.0).exp()),
            Profile::from_fn(grid.clone(), |r| 0.8 * (-r * r / 3.0).exp()),
        )
        .unwrap()
    }

    #[test]
    fn zero_state() {
        let g = RadialGrid::new(3, 10.0, 200).unwrap();
        let s = StatePair::zeros(g);
        let p = Params { dim: 3, p1: 2.5, p2: 2.5, ..params() };
        assert_eq!(energy(&s, &p), 0.0);
        assert_eq!(pohozaev(&s, &p), 0.0);
        assert!(gradient(&s, &p).u1.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gaussian_pair_closed_form() {
        // u = e^{-x^2/2}: |u'|^2 -> sqrt(pi)/2, |u|_4^4 -> sqrt(pi/2).
        let g = RadialGrid::new(1, 14.0, 16384).unwrap();
        let u = Profile::from_fn(g.clone(), |r| (-r * r / 2.0).exp());
        let s = StatePair::new(u.clone(), u).unwrap();
        let p = Params { mu2: 1.0, beta: 0.5, ..params() };
        let grad = PI.sqrt() / 2.0;
        let l4 = (PI / 2.0).sqrt();
        let exact = grad - 2.0 * l4 / 4.0 - 0.5 * l4;
        assert!((energy(&s, &p) - exact).abs() < 1e-6);
    }

    #[test]
    fn decoupling_at_zero_beta() {
        let g = RadialGrid::new(2, 12.0, 1000).unwrap();
        let s = gauss_pair(&g);
        let p = Params { dim: 2, beta: 0.0, ..params() };
        let i1 = 0.5 * s.u1.grad_norm_sq() - p.mu1 / p.p1 * s.u1.lp_integral(p.p1);
        let i2 = 0.5 * s.u2.grad_norm_sq() - p.mu2 / p.p2 * s.u2.lp_integral(p.p2);
        assert!((energy(&s, &p) - (i1 + i2)).abs() < 1e-14);
        let mut s2 = s.clone();
        s2.u1.scale(3.0);
        assert_eq!(gradient(&s, &p).u2.values(), gradient(&s2, &p).u2.values());
    }

    #[test]
    fn pohozaev_is_dilation_derivative() {
        let g = RadialGrid::new(3, 16.0, 4097).unwrap();
        let s = gauss_pair(&g);
        let p = Params { dim: 3, p1: 2.5, p2: 3.0, ..params() };
        let h = 1e-3;
        let fd = (energy(&s.dilate(1.0 + h).unwrap(), &p) - energy(&s.dilate(1.0 - h).unwrap(), &p))
            / (2.0 * h);
        let q = pohozaev(&s, &p);
        assert!((fd - q).abs() < 1e-4 * q.abs().max(1.0), "{fd} vs {q}");
        // exact grid dilation has no interpolation error
        let fd = (energy(&s.dilate_exact(1.0 + h).unwrap(), &p)
            - energy(&s.dilate_exact(1.0 - h).unwrap(), &p))
            / (2.0 * h);
        assert!((fd - q).abs() < 1e-5 * q.abs().max(1.0));
        // chain rule at t0
        let t0 = 1.4;
        let ints = Integrals::of(&s, &p);
        let d = (ints.energy_dilated(&p, t0 + h) - ints.energy_dilated(&p, t0 - h)) / (2.0 * h);
        let q0 = pohozaev(&s.dilate_exact(t0).unwrap(), &p) / t0;
        assert!((d - q0).abs() < 1e-5 * q0.abs().max(1.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = RadialGrid::new(3, 10.0, 400).unwrap();
        let s = gauss_pair(&g);
        for (r1, r2) in [(2.0, 2.0), (1.4, 1.6)] {
            let p = Params { dim: 3, p1: 2.5, p2: 3.0, r1, r2, ..params() };
            let gr = gradient(&s, &p);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let eps = 1e-6;
            for _ in 0..10 {
                let (c1, c2, k) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..3.0));
                let h1 = Profile::from_fn(g.clone(), |r| (c1 + c2 * (k * r).cos()) * (-r).exp());
                let h2 = Profile::from_fn(g.clone(), |r| (r * 3.0).sin() * (-r).exp() * 0.5);
                let dir = StatePair::new(h1, h2).unwrap();
                let mut sp = s.clone();
                for i in 0..2 {
                    let hv = dir.component(i).values().to_vec();
                    for (x, d) in sp.component_mut(i).values_mut().iter_mut().zip(hv) {
                        *x += eps * d;
                    }
                }
                let dj = (energy(&sp, &p) - energy(&s, &p)) / eps;
                let gh = crate::grid::inner(&gr.u1, &dir.u1).unwrap()
                    + crate::grid::inner(&gr.u2, &dir.u2).unwrap();
                let hn = (dir.u1.mass() + dir.u2.mass()).sqrt();
                assert!((gh - dj).abs() <= 1e-5 * hn.max(1.0), "{gh} {dj}");
            }
        }
    }

    #[test]
    fn signed_pow_extension() {
        assert_eq!(signed_pow(0.0, 0.4), 0.0);
        assert!((signed_pow(-8.0, 1.0 / 3.0) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn multipliers_need_mass() {
        let g = RadialGrid::new(1, 10.0, 200).unwrap();
        let mut s = gauss_pair(&g);
        s.u2.scale(0.0);
        assert!(matches!(lagrange_multipliers(&s, &params()), Err(Error::ZeroMass(2))));
    }
}
