//! Normalized solutions of the two-component nonlinear Schrödinger system
//!
//! ```text
//! -Δu1 = λ1 u1 + μ1 |u1|^{p1-2} u1 + β r1 |u1|^{r1-2} u1 |u2|^{r2}
//! -Δu2 = λ2 u2 + μ2 |u2|^{p2-2} u2 + β r2 |u1|^{r1} |u2|^{r2-2} u2
//! ∫|u1|² = a1,  ∫|u2|² = a2
//! ```
//!
//! on radial grids in `R^N`: a local minimizer inside a gradient ball, a
//! mountain-pass point or a linking point, plus the supporting constants,
//! rearrangements, fibering maps and time evolution.

pub mod dynamics;
pub mod energy;
pub mod error;
pub mod grid;
pub mod interp;
pub mod linalg;
pub mod model;
pub mod rearrange;
pub mod run;
pub mod scalar;
pub mod solvers;
pub mod suite;

pub use energy::{energy, gradient, lagrange_multipliers, pohozaev, Classification, SolutionRecord, StatePair};
pub use error::{Error, Result};
pub use grid::{Profile, RadialGrid};
pub use model::{classify_regime, compute_thresholds, GeometryConstants, GnConstants, Params, Regime};
