//! Constrained critical points of the energy on the product of mass spheres:
//! local minimizer, mountain pass, linking saddle; plus the fibering map.

pub mod descent;
pub mod fibering;
pub mod linking;
pub mod local;
pub mod mountain_pass;
pub mod newton;

pub use fibering::{fibering_curve, stationary_bracket, DilationCurve, FiberingCoeffs, StationaryKind, StationaryPoint};
pub use linking::{
    beta1, coupling_constant, cross_dilated, degree_checks, dilate_components, linking_geometry, linking_setup, linking_solve,
    plane_peak, DegreeCheck, LinkingReport, LinkingSetup,
};
pub use local::{initial_pair, local_level, local_minimize, subadditivity_check, SubadditivityReport};
pub use mountain_pass::{dilation_path, mountain_pass, PathFamily, PathSpec};
pub use newton::{newton_refine, NewtonOptions, NewtonOutcome};

use serde::{Deserialize, Serialize};

/// Knobs shared by all solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Residual tolerance for the certificate (gradient and Pohozaev).
    pub tol: f64,
    /// Working grid size for the descent phase.
    pub grid_n: usize,
    /// Final grid size for the Newton polish.
    pub final_n: usize,
    /// Fixed truncation radius; chosen from the decay rate when `None`.
    pub r_max: Option<f64>,
    pub seed: u64,
    pub max_iter: usize,
    /// `rho_bar = fraction * rho0` in the admissible path class.
    pub rho_bar_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            grid_n: 2049,
            final_n: 16385,
            r_max: None,
            seed: 0,
            max_iter: 4000,
            rho_bar_fraction: 0.25,
        }
    }
}

/// Truncation radius in units of the slowest decay length `1/sqrt(-lambda)`.
pub(crate) const DECAY_LENGTHS: f64 = 26.0;

use crate::energy::{lagrange_multipliers, StatePair};
use crate::error::Result;
use crate::model::Params;
use descent::{descend, regrid, target_radius, DescentConfig};

/// Moves a converged descent iterate to the fine grid and polishes it with
/// Newton; falls back to descent on the fine grid if Newton fails. Returns
/// the state, the iterations spent and the largest clipped negative part.
pub(crate) fn polish<P>(state: StatePair, params: &Params, opts: &SolverOptions, project: P) -> Result<(StatePair, usize, f64)>
where
    P: FnMut(StatePair) -> Result<StatePair>,
{
    let lambda = crate::energy::multipliers_lenient(&state, &crate::energy::gradient(&state, params));
    let r_max = target_radius(&state, lambda, params, opts.r_max);
    let fine = regrid(&state, r_max, opts.final_n, params)?;
    let lambda = lagrange_multipliers(&fine, params).unwrap_or(lambda);
    match newton_refine(&fine, params, lambda, &NewtonOptions::default()) {
        Ok(out) => {
            let mut s = out.state;
            let removed = s.clip_negative();
            s.normalize_masses(params.a1, params.a2)?;
            Ok((s, out.iterations, removed))
        }
        Err(e) => {
            log::warn!("Newton polish failed ({e}); continuing with descent on the fine grid");
            let cfg = DescentConfig {
                max_iter: 20_000,
                stop_residual: 0.1 * opts.tol,
                grid_n: opts.final_n,
                r_max: Some(r_max),
                ball: None,
            };
            let out = descend(fine, params, &cfg, project)?;
            Ok((out.state, out.iterations, out.projection))
        }
    }
}
