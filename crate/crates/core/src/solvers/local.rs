//! The local minimizer of the energy inside the gradient ball `B(rho0)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{energy, Classification, SolutionRecord, StatePair};
use crate::error::{Error, Result};
use crate::grid::{Profile, RadialGrid};
use crate::model::{GeometryConstants, Params, Regime};

use super::descent::{descend, DescentConfig};
use super::fibering::fibering_curve;
use super::{polish, SolverOptions};

/// Residual at which descent hands over to Newton.
const NEWTON_SWITCH: f64 = 1e-3;

/// A positive starting pair in `S(a1, a2)` with kinetic energy `rho0 / 4`:
/// Gaussians for seed 0, randomly shaped bumps otherwise, dilated towards
/// `t -> 0`.
pub fn initial_pair(params: &Params, constants: &GeometryConstants, opts: &SolverOptions) -> Result<StatePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut shape = |seeded: bool| -> (f64, f64) {
        if seeded {
            (rng.gen_range(0.6..1.6), rng.gen_range(0.0..0.5))
        } else {
            (1.0, 0.0)
        }
    };
    let (s1, b1) = shape(opts.seed != 0);
    let (s2, b2) = shape(opts.seed != 0);
    let grid = RadialGrid::new(params.dim, 12.0 * s1.max(s2), opts.grid_n)?;
    let bump = |s: f64, b: f64| move |r: f64| (1.0 + b * r * r) * (-r * r / (2.0 * s * s)).exp();
    let mut st = StatePair::new(
        Profile::from_fn(grid.clone(), bump(s1, b1)),
        Profile::from_fn(grid, bump(s2, b2)),
    )?;
    st.normalize_masses(params.a1, params.a2)?;
    let kin = st.kinetic();
    if kin <= 0.0 {
        return Err(Error::param("a1", "both masses are zero"));
    }
    st.dilate_exact((0.25 * constants.rho0 / kin).sqrt())
}

fn require_regime(params: &Params) -> Result<Regime> {
    params.validate()?;
    match params.regime()? {
        Regime::Other => Err(Error::Regime(
            "parameters satisfy neither (H0) nor (H1); the ball geometry is not available".into(),
        )),
        r => Ok(r),
    }
}

/// Dilates to the first fibering minimum when it stays inside the ball and
/// lowers the energy.
fn to_fibering_min(st: StatePair, params: &Params, rho0: f64) -> Result<StatePair> {
    let curve = fibering_curve(&st, params);
    if let Some(m) = curve.first_min() {
        let kin = st.kinetic();
        if (m.t - 1.0).abs() > 1e-12 && m.t * m.t * kin <= rho0 && m.theta < curve.coeffs.theta(1.0) {
            return st.dilate_exact(m.t);
        }
    }
    Ok(st)
}

/// Minimizes the energy over `S(a1, a2)` inside `B(rho0)`, starting from
/// `initial` (which must lie in the ball).
pub fn local_minimize(
    params: &Params,
    constants: &GeometryConstants,
    initial: &StatePair,
    opts: &SolverOptions,
) -> Result<SolutionRecord> {
    require_regime(params)?;
    let rho0 = constants.rho0;
    let mut st = initial.clone();
    st.clip_negative();
    st.normalize_masses(params.a1, params.a2)?;
    if st.kinetic() > rho0 {
        return Err(Error::param("initial", "initial state lies outside B(rho0)"));
    }
    let cfg = DescentConfig {
        max_iter: opts.max_iter,
        stop_residual: NEWTON_SWITCH.min(opts.tol * 100.0).max(opts.tol),
        grid_n: opts.grid_n,
        r_max: opts.r_max,
        ball: Some(rho0),
    };
    let out = descend(st, params, &cfg, |s| to_fibering_min(s, params, rho0))?;
    if out.stalled && out.hit_ball {
        return Err(Error::ExitedBall {
            kinetic: out.state.kinetic(),
            bound: rho0,
        });
    }
    log::info!(
        "local descent: {} iterations, residual {:e}, J = {:.10e}",
        out.iterations,
        out.residual,
        energy(&out.state, params)
    );
    let (state, newton_its, removed) = polish(out.state, params, opts, |s| to_fibering_min(s, params, rho0))?;
    let rec = SolutionRecord::from_state(
        state,
        *params,
        *constants,
        Classification::LocalMin,
        out.iterations + newton_its,
        out.projection.max(removed),
    );
    if rec.kinetic() > rho0 {
        return Err(Error::ExitedBall {
            kinetic: rec.kinetic(),
            bound: rho0,
        });
    }
    if !(rec.energy < 0.0) {
        return Err(Error::Geometry(format!("local minimum energy {:e} is not negative", rec.energy)));
    }
    rec.certify(opts.tol)?;
    Ok(rec)
}

/// `m(a1, a2)` from a fresh local minimization; `m(0, 0) = 0`.
pub fn local_level(params: &Params, constants: &GeometryConstants, opts: &SolverOptions) -> Result<f64> {
    if params.a1 == 0.0 && params.a2 == 0.0 {
        return Ok(0.0);
    }
    let init = initial_pair(params, constants, opts)?;
    Ok(local_minimize(params, constants, &init, opts)?.energy)
}

/// Outcome of one sub-additivity comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    pub a: (f64, f64),
    pub d: (f64, f64),
    pub m_total: f64,
    pub m_part: f64,
    pub m_rest: f64,
    /// `m_part + m_rest + 2 tol - m_total`; nonnegative when the inequality holds.
    pub slack: f64,
    pub holds: bool,
    /// `m_total < 0`.
    pub total_negative: bool,
}

/// Compares `m(a1, a2)` with `m(d1, d2) + m(a1 - d1, a2 - d2)`. All three
/// levels use the ball radius of the full masses.
pub fn subadditivity_check(
    params: &Params,
    constants: &GeometryConstants,
    d1: f64,
    d2: f64,
    opts: &SolverOptions,
) -> Result<SubadditivityReport> {
    if !(0.0..=params.a1).contains(&d1) {
        return Err(Error::param("d1", "must lie in [0, a1]"));
    }
    if !(0.0..=params.a2).contains(&d2) {
        return Err(Error::param("d2", "must lie in [0, a2]"));
    }
    let m_total = local_level(params, constants, opts)?;
    let m_part = local_level(&params.with_masses(d1, d2), constants, opts)?;
    let m_rest = local_level(&params.with_masses(params.a1 - d1, params.a2 - d2), constants, opts)?;
    let slack = m_part + m_rest + 2.0 * opts.tol - m_total;
    Ok(SubadditivityReport {
        a: (params.a1, params.a2),
        d: (d1, d2),
        m_total,
        m_part,
        m_rest,
        slack,
        holds: slack >= 0.0,
        total_negative: m_total < 0.0,
    })
}
