//! Preconditioned projected-gradient steps on the product of mass spheres,
//! shared by all three solvers.

use std::sync::Arc;

use crate::energy::{energy, gradient, multipliers_lenient, precondition, residuals, StatePair};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::model::Params;

use super::DECAY_LENGTHS;

/// A tangent descent direction and its slope `<grad J, d>` (nonnegative).
#[derive(Debug, Clone)]
pub(crate) struct Direction {
    pub d: StatePair,
    pub slope: f64,
}

fn w_inner(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
}

/// Direction `d = P g - (<P g, u> / <P u, u>) P u` per component, with
/// `P = (sigma W + K)^{-1} W` and `sigma` the component's kinetic/mass
/// ratio. `<d, u> = 0`, so a small step preserves mass to second order, and
/// `<g, d> >= 0` by Cauchy-Schwarz in the `P` inner product.
pub(crate) fn descent_direction(state: &StatePair, params: &Params) -> Direction {
    let grid = state.grid().clone();
    let w = grid.weights();
    let g = gradient(state, params);
    let mut d = StatePair::zeros(grid.clone());
    let mut slope = 0.0;
    for c in 0..2 {
        let u = state.component(c);
        let m = u.mass();
        if m <= 0.0 {
            continue;
        }
        let sigma = (u.grad_norm_sq() / m).max(1e-12);
        let gc = g.component(c).values();
        let z = precondition(&grid, sigma, gc);
        let y = precondition(&grid, sigma, u.values());
        let coef = w_inner(w, &z, u.values()) / w_inner(w, &y, u.values());
        let dc = d.component_mut(c).values_mut();
        for j in 0..dc.len() {
            dc[j] = z[j] - coef * y[j];
        }
        slope += w_inner(w, gc, dc);
    }
    Direction { d, slope }
}

/// `u - tau d`, negative parts clipped, masses restored. Returns the new
/// state and the largest clipped magnitude.
pub(crate) fn retract(state: &StatePair, d: &StatePair, tau: f64, params: &Params) -> Result<(StatePair, f64)> {
    let mut out = state.clone();
    for c in 0..2 {
        let dv = d.component(c).values();
        for (v, x) in out.component_mut(c).values_mut().iter_mut().zip(dv) {
            *v -= tau * x;
        }
    }
    let removed = out.clip_negative();
    out.normalize_masses(params.a1, params.a2)?;
    Ok((out, removed))
}

/// Truncation radius `DECAY_LENGTHS / sqrt(-lambda)` for the slowest-decaying
/// active component, if all active multipliers are negative.
pub(crate) fn decay_radius(lambda: (f64, f64), params: &Params) -> Option<f64> {
    let mut slowest = f64::INFINITY;
    for (l, a) in [(lambda.0, params.a1), (lambda.1, params.a2)] {
        if a > 0.0 {
            if !(l < 0.0) {
                return None;
            }
            slowest = slowest.min(-l);
        }
    }
    slowest.is_finite().then(|| DECAY_LENGTHS / slowest.sqrt())
}

/// Radius from the kinetic/mass length scale, used before the multipliers
/// settle.
pub(crate) fn fallback_radius(state: &StatePair) -> f64 {
    let (m1, m2) = state.masses();
    let kin = state.kinetic().max(1e-300);
    12.0 * ((m1 + m2) / kin).sqrt()
}

/// Resamples onto a uniform grid of `n` points over `[0, r_max]` and restores
/// the masses.
pub(crate) fn regrid(state: &StatePair, r_max: f64, n: usize, params: &Params) -> Result<StatePair> {
    let grid: Arc<RadialGrid> = RadialGrid::new(state.grid().dim(), r_max, n)?;
    let mut out = state.resample(&grid)?;
    out.clip_negative();
    out.normalize_masses(params.a1, params.a2)?;
    Ok(out)
}

/// Regrids when the current radius is off the target by more than 25%.
pub(crate) fn maybe_regrid(state: StatePair, target: f64, n: usize, params: &Params) -> Result<StatePair> {
    let cur = state.grid().r_max();
    if state.grid().len() != n || cur < 0.8 * target || cur > 1.25 * target {
        regrid(&state, target, n, params)
    } else {
        Ok(state)
    }
}

/// Picks the working radius: fixed if configured, otherwise from the decay
/// rate (or the length scale early on).
pub(crate) fn target_radius(state: &StatePair, lambda: (f64, f64), params: &Params, fixed: Option<f64>) -> f64 {
    fixed.unwrap_or_else(|| decay_radius(lambda, params).unwrap_or_else(|| fallback_radius(state)))
}

pub(crate) fn check_finite(state: &StatePair) -> Result<()> {
    for c in 0..2 {
        if let Some(i) = state.component(c).values().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }
    Ok(())
}

/// Settings of one descent run.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DescentConfig {
    pub max_iter: usize,
    /// Stop once the dual gradient residual falls below this.
    pub stop_residual: f64,
    pub grid_n: usize,
    pub r_max: Option<f64>,
    /// Reject trial states whose kinetic energy exceeds this.
    pub ball: Option<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct DescentOutcome {
    pub state: StatePair,
    pub iterations: usize,
    pub projection: f64,
    pub residual: f64,
    /// The step size collapsed before reaching the residual target.
    pub stalled: bool,
    /// Some trial was rejected only because it left the ball.
    pub hit_ball: bool,
}

/// Minimizes `J(project(u))` over the mass spheres by preconditioned
/// projected-gradient steps with backtracking. `project` maps a state to
/// the representative on which the objective is evaluated (a dilation to a
/// fibering extremum, or the identity); it may fail, which rejects the step.
pub(crate) fn descend<P>(initial: StatePair, params: &Params, cfg: &DescentConfig, mut project: P) -> Result<DescentOutcome>
where
    P: FnMut(StatePair) -> Result<StatePair>,
{
    let mut st = project(initial)?;
    let mut j = energy(&st, params);
    let mut step = 0.5;
    let mut projection = 0.0f64;
    let mut hit_ball = false;
    let mut lambda = lagrange_estimate(&st, params);
    for it in 0..cfg.max_iter {
        let target = target_radius(&st, lambda, params, cfg.r_max);
        let regridded = maybe_regrid(st.clone(), target, cfg.grid_n, params)?;
        if !Arc::ptr_eq(regridded.grid(), st.grid()) {
            st = project(regridded)?;
            j = energy(&st, params);
        }
        let res = residuals(&st, params);
        lambda = (res.lambda1, res.lambda2);
        if res.grad < cfg.stop_residual {
            return Ok(DescentOutcome {
                state: st,
                iterations: it,
                projection,
                residual: res.grad,
                stalled: false,
                hit_ball,
            });
        }
        let dir = descent_direction(&st, params);
        let mut accepted = false;
        while step > 1e-12 {
            let trial = retract(&st, &dir.d, step, params).and_then(|(t, removed)| Ok((project(t)?, removed)));
            if let Ok((trial, removed)) = trial {
                let inside = cfg.ball.map_or(true, |b| trial.kinetic() <= b);
                hit_ball |= !inside;
                let j1 = energy(&trial, params);
                if inside && j1 <= j - 1e-4 * step * dir.slope {
                    st = trial;
                    j = j1;
                    projection = projection.max(removed);
                    step = (step * 1.25).min(1.0);
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        check_finite(&st)?;
        if !accepted {
            log::debug!("descent stalled at iteration {it}, residual {:e}", res.grad);
            return Ok(DescentOutcome {
                state: st,
                iterations: it,
                projection,
                residual: res.grad,
                stalled: true,
                hit_ball,
            });
        }
        if it % 100 == 0 {
            log::debug!("descent it {it}: J = {j:.12e}, residual {:e}, step {step:e}", res.grad);
        }
    }
    let res = residuals(&st, params);
    Err(Error::NoConvergence {
        context: "projected descent".into(),
        iterations: cfg.max_iter,
        residual: res.grad,
    })
}

fn lagrange_estimate(state: &StatePair, params: &Params) -> (f64, f64) {
    multipliers_lenient(state, &gradient(state, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::energy;
    use crate::grid::Profile;

    fn params() -> Params {
        Params {
            dim: 3,
            p1: 2.5,
            p2: 2.5,
            r1: 2.0,
            r2: 2.0,
            mu1: 1.0,
            mu2: 1.0,
            beta: 0.01,
            a1: 1.0,
            a2: 0.5,
        }
    }

    fn state() -> StatePair {
        let grid = RadialGrid::new(3, 20.0, 1025).unwrap();
        let mut s = StatePair::new(
            Profile::from_fn(grid.clone(), |r| (-r * r / 8.0).exp()),
            Profile::from_fn(grid, |r| (1.0 + 0.3 * r) * (-r / 2.0).exp()),
        )
        .unwrap();
        s.normalize_masses(1.0, 0.5).unwrap();
        s
    }

    #[test]
    fn direction_is_tangent_and_descending() {
        let s = state();
        let dir = descent_direction(&s, &params());
        assert!(dir.slope > 0.0);
        for c in 0..2 {
            let t = crate::grid::inner(dir.d.component(c), s.component(c)).unwrap();
            assert!(t.abs() < 1e-10 * dir.d.component(c).mass().sqrt().max(1e-300), "{t}");
        }
        let j0 = energy(&s, &params());
        let (s1, _) = retract(&s, &dir.d, 1e-3, &params()).unwrap();
        let j1 = energy(&s1, &params());
        assert!(j1 < j0);
        // first-order prediction
        assert!(((j0 - j1) / (1e-3 * dir.slope) - 1.0).abs() < 0.05);
        let (m1, m2) = s1.masses();
        assert!((m1 - 1.0).abs() < 1e-12 && (m2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn decay_radius_needs_negative_multipliers() {
        let p = params();
        assert!(decay_radius((-0.25, 0.1), &p).is_none());
        assert!((decay_radius((-0.25, -1.0), &p).unwrap() - DECAY_LENGTHS / 0.5).abs() < 1e-12);
        assert!(decay_radius((-0.25, 0.1), &p.with_masses(1.0, 0.0)).is_some());
    }
}
