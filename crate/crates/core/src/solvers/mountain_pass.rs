//! Mountain-pass critical point under (H0): minimize the peak of the energy
//! along dilation paths `t -> (u1^t, u2^t)`.

use serde::{Deserialize, Serialize};

use crate::energy::{energy, Classification, SolutionRecord, StatePair};
use crate::error::{Error, Result};
use crate::model::{GeometryConstants, Params, Regime};

use super::descent::{descend, DescentConfig};
use super::fibering::{fibering_curve, log_grid};
use super::{polish, SolverOptions};

const NEWTON_SWITCH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathFamily {
    DilationSegment,
    LinkingRectangle,
}

/// A dilation path `t -> u^t`, `t in [t_start, t_end]`, sampled at `nodes`
/// log-spaced points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub family: PathFamily,
    pub t_start: f64,
    pub t_end: f64,
    pub nodes: usize,
    pub start_kinetic: f64,
    pub end_kinetic: f64,
    pub start_energy: f64,
    pub end_energy: f64,
    /// Largest sampled energy and where it occurs.
    pub max_t: f64,
    pub max_energy: f64,
    /// `g(0)` in `B(rho_bar)`, `g(1)` outside the closed `B(rho0)` with
    /// negative energy.
    pub admissible: bool,
}

/// Builds the dilation path through `state` used to seed the mountain pass:
/// it starts inside `B(rho_bar)` and is extended until it leaves
/// `B(rho0)` with negative energy.
pub fn dilation_path(
    state: &StatePair,
    params: &Params,
    constants: &GeometryConstants,
    rho_bar: f64,
    nodes: usize,
) -> Result<PathSpec> {
    let curve = fibering_curve(state, params);
    let c = curve.coeffs;
    let kin = c.a;
    if kin <= 0.0 {
        return Err(Error::Geometry("zero state has no dilation path".into()));
    }
    let t_start = (rho_bar / kin).sqrt().min(1.0);
    let mut t_end = curve.highest_max().map_or(1.0, |m| m.t).max(t_start * 2.0);
    let rho0 = constants.rho0;
    let mut guard = 0;
    while !(t_end * t_end * kin > rho0 && c.theta(t_end) < 0.0) {
        t_end *= 1.5;
        guard += 1;
        if guard > 200 || !t_end.is_finite() {
            return Err(Error::Geometry("energy does not become negative along the dilation".into()));
        }
    }
    let ts = log_grid(t_start, t_end, nodes);
    let (max_t, max_energy) = ts
        .iter()
        .map(|&t| (t, c.theta(t)))
        .fold((t_start, f64::NEG_INFINITY), |m, x| if x.1 > m.1 { x } else { m });
    let start_kinetic = t_start * t_start * kin;
    let end_kinetic = t_end * t_end * kin;
    let end_energy = c.theta(t_end);
    Ok(PathSpec {
        family: PathFamily::DilationSegment,
        t_start,
        t_end,
        nodes,
        start_kinetic,
        end_kinetic,
        start_energy: c.theta(t_start),
        end_energy,
        max_t,
        max_energy,
        admissible: start_kinetic <= rho_bar && end_kinetic > rho0 && end_energy < 0.0,
    })
}

/// Dilates to the highest fibering maximum.
pub(crate) fn to_fibering_max(st: StatePair, params: &Params) -> Result<StatePair> {
    let curve = fibering_curve(&st, params);
    let m = curve
        .highest_max()
        .ok_or_else(|| Error::Geometry("fibering map has no interior maximum".into()))?;
    if (m.t - 1.0).abs() < 1e-13 {
        Ok(st)
    } else {
        st.dilate_exact(m.t)
    }
}

/// Mountain-pass solution at level `gamma(a1, a2)`, started from the
/// dilation path through the local minimizer.
pub fn mountain_pass(
    params: &Params,
    constants: &GeometryConstants,
    local_sol: &SolutionRecord,
    opts: &SolverOptions,
) -> Result<SolutionRecord> {
    params.validate()?;
    if params.regime()? != Regime::H0 {
        return Err(Error::Regime("mountain pass requires (H0)".into()));
    }
    let rho_bar = constants.rho_bar(opts.rho_bar_fraction);
    let path = dilation_path(&local_sol.state, params, constants, rho_bar, 64)?;
    if !path.admissible {
        return Err(Error::Geometry(format!("initial dilation path is not admissible: {path:?}")));
    }
    let endpoint = path.start_energy.max(path.end_energy);
    let cfg = DescentConfig {
        max_iter: opts.max_iter,
        stop_residual: NEWTON_SWITCH.min(opts.tol * 100.0).max(opts.tol),
        grid_n: opts.grid_n,
        r_max: opts.r_max,
        ball: None,
    };
    let out = descend(local_sol.state.clone(), params, &cfg, |s| to_fibering_max(s, params))?;
    let peak = energy(&out.state, params);
    log::info!(
        "mountain-pass descent: {} iterations, residual {:e}, peak {:.10e}",
        out.iterations,
        out.residual,
        peak
    );
    if peak <= endpoint {
        return Err(Error::PathCollapse { peak, endpoint });
    }
    let (state, newton_its, removed) = polish(out.state, params, opts, |s| to_fibering_max(s, params))?;
    let rec = SolutionRecord::from_state(
        state,
        *params,
        *constants,
        Classification::MountainPass,
        out.iterations + newton_its,
        out.projection.max(removed),
    );
    if !(rec.energy > 0.0) {
        return Err(Error::Geometry(format!("mountain-pass energy {:e} is not positive", rec.energy)));
    }
    positive_components(&rec)?;
    rec.certify(opts.tol)?;
    Ok(rec)
}

pub(crate) fn positive_components(rec: &SolutionRecord) -> Result<()> {
    for (c, a) in [(0, rec.params.a1), (1, rec.params.a2)] {
        let u = rec.state.component(c);
        if a > 0.0 && !(u.sup_norm() > 0.0 && u.values().iter().all(|v| *v >= 0.0)) {
            return Err(Error::Geometry(format!("component {} is not nonnegative and nontrivial", c + 1)));
        }
    }
    Ok(())
}
