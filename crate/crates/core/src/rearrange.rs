//! The two-function symmetric rearrangement `{u, v}*`: the radial
//! nonincreasing profile whose super-level sets are balls with measure
//! `|{u > t}| + |{v > t}|`.
//!
//! Profiles are read as piecewise linear in `r`, so super-level sets of a
//! nonincreasing profile are balls with closed-form radii.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ball_volume, mixed_term, Profile, RadialGrid};

/// Sampled distribution function `t -> |{u > t}| + |{v > t}|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMeasure {
    /// Decreasing levels.
    pub thresholds: Vec<f64>,
    pub measures: Vec<f64>,
}

fn check_nonnegative(u: &Profile) -> Result<()> {
    match u.values().iter().position(|v| *v < 0.0) {
        Some(node) => Err(Error::NegativeInput {
            node,
            value: u.values()[node],
        }),
        None => Ok(()),
    }
}

fn is_nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

/// Classical decreasing rearrangement on the same grid: nodal values are
/// sorted and reassigned by cumulative cell volume. Identity on
/// nonincreasing profiles.
pub fn schwarz(u: &Profile) -> Result<Profile> {
    check_nonnegative(u)?;
    if is_nonincreasing(u.values()) {
        return Ok(u.clone());
    }
    let grid = u.grid().clone();
    let w = grid.weights();
    let mut cells: Vec<(f64, f64)> = u.values().iter().copied().zip(w.iter().copied()).collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut cum = Vec::with_capacity(cells.len());
    let mut acc = 0.0;
    for c in &cells {
        acc += c.1;
        cum.push(acc);
    }
    let dim = grid.dim();
    let mut out: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| {
            let vol = ball_volume(dim, r);
            let k = cum.partition_point(|c| *c < vol).min(cells.len() - 1);
            cells[k].0
        })
        .collect();
    *out.last_mut().unwrap() = 0.0;
    Profile::new(grid, out)
}

/// Nonincreasing, nonnegative profile, read between nodes by log-linear
/// interpolation (linear into a zero node). Powers commute with this
/// interpolation, so `{u^r, v^r}*` and `({u, v}*)^r` agree to rounding.
struct Monotone<'a> {
    r: &'a [f64],
    u: &'a [f64],
}

impl Monotone<'_> {
    /// Number of nodes with `u > t`; the ball `{u > t}` ends in segment
    /// `[r_{k-1}, r_k]`.
    fn segment(&self, t: f64) -> usize {
        self.u.partition_point(|v| *v > t)
    }

    fn radius_in(&self, k: usize, t: f64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        if k == self.u.len() {
            return *self.r.last().unwrap();
        }
        let (u0, u1) = (self.u[k - 1], self.u[k]);
        let (r0, r1) = (self.r[k - 1], self.r[k]);
        if u1 > 0.0 {
            r0 + (r1 - r0) * (u0 / t).ln() / (u0 / u1).ln()
        } else {
            r0 + (r1 - r0) * (u0 - t) / u0
        }
    }

    /// `t d/dt radius_in(k, t)`: constant in `ln t` on log-linear segments.
    fn radius_log_slope(&self, k: usize, t: f64) -> f64 {
        if k == 0 || k == self.u.len() {
            return 0.0;
        }
        let (u0, u1) = (self.u[k - 1], self.u[k]);
        let dr = self.r[k] - self.r[k - 1];
        if u1 > 0.0 {
            -dr / (u0 / u1).ln()
        } else {
            -dr * t / u0
        }
    }

    /// Radius of the ball `{u > t}` for `t >= 0`.
    fn radius(&self, t: f64) -> f64 {
        self.radius_in(self.segment(t), t)
    }

    fn sup(&self) -> f64 {
        self.u.first().copied().unwrap_or(0.0)
    }
}

/// Output grid with the finer of the two spacings, extended so the combined
/// support (radius up to `2^{1/N} max r_max`) fits; its nodes coincide with
/// the input nodes when the spacings agree.
pub fn output_grid(u: &Profile, v: &Profile) -> Result<Arc<RadialGrid>> {
    let dim = u.grid().dim();
    if v.grid().dim() != dim {
        return Err(Error::GridMismatch("rearrangement inputs of different dimension".into()));
    }
    let h = u.grid().spacing().min(v.grid().spacing());
    let reach = 2f64.powf(1.0 / dim as f64) * u.grid().r_max().max(v.grid().r_max());
    let n = (reach / h).ceil() as usize + 1;
    RadialGrid::new(dim, h * (n - 1) as f64, n)
}

/// `{u, v}*` on [`output_grid`].
pub fn shibata(u: &Profile, v: &Profile) -> Result<Profile> {
    let grid = output_grid(u, v)?;
    shibata_on(u, v, &grid)
}

/// `{u, v}*` sampled on a given grid. Non-monotone inputs are first replaced
/// by their decreasing rearrangements.
pub fn shibata_on(u: &Profile, v: &Profile, grid: &Arc<RadialGrid>) -> Result<Profile> {
    check_nonnegative(u)?;
    check_nonnegative(v)?;
    if u.grid().dim() != grid.dim() || v.grid().dim() != grid.dim() {
        return Err(Error::GridMismatch("rearrangement inputs of different dimension".into()));
    }
    let us = schwarz(u)?;
    let vs = schwarz(v)?;
    let mu = Monotone {
        r: us.grid().nodes(),
        u: us.values(),
    };
    let mv = Monotone {
        r: vs.grid().nodes(),
        u: vs.values(),
    };
    let n = grid.dim() as i32;
    let top = mu.sup().max(mv.sup());
    let total = |t: f64| mu.radius(t).powi(n) + mv.radius(t).powi(n);
    let full = total(0.0);
    // distinct levels, decreasing, with the measure function at each
    let mut levels: Vec<f64> = us.values().iter().chain(vs.values()).copied().filter(|x| *x > 0.0).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    let measure: Vec<f64> = levels.iter().map(|&t| total(t)).collect();
    let mut k = 0;
    let mut out: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| {
            let target = r.powi(n);
            if target >= full || levels.is_empty() {
                return 0.0;
            }
            if target == 0.0 {
                return top;
            }
            while k + 1 < levels.len() && measure[k + 1] <= target {
                k += 1;
            }
            // no node value in (lo, hi): both balls end in fixed segments
            let hi = levels[k];
            let lo = levels.get(k + 1).copied().unwrap_or(0.0);
            let mid = 0.5 * (lo + hi);
            let (ku, kv) = (mu.segment(mid), mv.segment(mid));
            // safeguarded Newton in ln t, where log-linear radii are affine
            let nf = n as f64;
            let (mut a, mut b) = (lo, hi);
            let mut t = if lo > 0.0 { (lo * hi).sqrt() } else { mid };
            for _ in 0..200 {
                let (ra, rb) = (mu.radius_in(ku, t), mv.radius_in(kv, t));
                let f = ra.powi(n) + rb.powi(n) - target;
                if f.abs() <= 1e-15 * target {
                    break;
                }
                if f > 0.0 {
                    a = t;
                } else {
                    b = t;
                }
                let df = nf * (ra.powi(n - 1) * mu.radius_log_slope(ku, t) + rb.powi(n - 1) * mv.radius_log_slope(kv, t));
                let mut next = if df < 0.0 { t * (-f / df).exp() } else { f64::NAN };
                if !(next > a && next < b) {
                    next = 0.5 * (a + b);
                }
                if (next - t).abs() <= 1e-15 * t || b - a <= 1e-15 * hi {
                    t = next;
                    break;
                }
                t = next;
            }
            t
        })
        .collect();
    *out.last_mut().unwrap() = 0.0;
    Profile::new(grid.clone(), out)
}

/// Distribution function of the pair at the sorted distinct nodal values.
pub fn level_measure(u: &Profile, v: &Profile) -> Result<LevelMeasure> {
    let us = schwarz(u)?;
    let vs = schwarz(v)?;
    let mu = Monotone {
        r: us.grid().nodes(),
        u: us.values(),
    };
    let mv = Monotone {
        r: vs.grid().nodes(),
        u: vs.values(),
    };
    let mut t: Vec<f64> = us.values().iter().chain(vs.values()).copied().filter(|x| *x > 0.0).collect();
    t.sort_by(|a, b| b.total_cmp(a));
    t.dedup();
    let dim = u.grid().dim();
    let measures = t
        .iter()
        .map(|&x| ball_volume(dim, mu.radius(x)) + ball_volume(dim, mv.radius(x)))
        .collect();
    Ok(LevelMeasure { thresholds: t, measures })
}

/// Max relative node deviation between `({u,v}*)^r` and `{u^r, v^r}*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIdentityReport {
    pub r: f64,
    pub max_deviation: f64,
}

pub fn shibata_power_identity_check(u: &Profile, v: &Profile, r: f64) -> Result<PowerIdentityReport> {
    let grid = output_grid(u, v)?;
    let w = shibata_on(u, v, &grid)?;
    let pow = |p: &Profile| Profile::new(p.grid().clone(), p.values().iter().map(|x| x.powf(r)).collect());
    let wr = shibata_on(&pow(u)?, &pow(v)?, &grid)?;
    let scale = wr.sup_norm().max(1e-300);
    let max_deviation = w
        .values()
        .iter()
        .zip(wr.values())
        .map(|(a, b)| (a.powf(r) - b).abs() / scale)
        .fold(0.0, f64::max);
    Ok(PowerIdentityReport { r, max_deviation })
}

/// Both sides of `int u1^r1 u2^r2 + v1^r1 v2^r2 <= int ({u1,v1}*)^r1 ({u2,v2}*)^r2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossTermReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    /// `slack / max(lhs, rhs)`.
    pub relative_slack: f64,
}

pub fn cross_term_inequality_check(
    u1: &Profile,
    u2: &Profile,
    v1: &Profile,
    v2: &Profile,
    r1: f64,
    r2: f64,
) -> Result<CrossTermReport> {
    for p in [u1, u2, v1, v2] {
        check_nonnegative(p)?;
    }
    let lhs = mixed_term(u1, u2, r1, r2)? + mixed_term(v1, v2, r1, r2)?;
    // one output grid for both rearrangements
    let g1 = output_grid(u1, v1)?;
    let g2 = output_grid(u2, v2)?;
    let grid = if g1.spacing() <= g2.spacing() && g1.r_max() >= g2.r_max() {
        g1
    } else if g2.spacing() <= g1.spacing() && g2.r_max() >= g1.r_max() {
        g2
    } else {
        let h = g1.spacing().min(g2.spacing());
        let reach = g1.r_max().max(g2.r_max());
        let n = (reach / h).ceil() as usize + 1;
        RadialGrid::new(g1.dim(), h * (n - 1) as f64, n)?
    };
    let w1 = shibata_on(u1, v1, &grid)?;
    let w2 = shibata_on(u2, v2, &grid)?;
    let rhs = mixed_term(&w1, &w2, r1, r2)?;
    let slack = rhs - lhs;
    let denom = lhs.abs().max(rhs.abs());
    Ok(CrossTermReport {
        lhs,
        rhs,
        slack,
        relative_slack: if denom > 0.0 { slack / denom } else { 0.0 },
    })
}

/// Relative defect `(||w||_p^p - ||u||_p^p - ||v||_p^p) / (||u||_p^p + ||v||_p^p)`.
pub fn norm_additivity_defect(u: &Profile, v: &Profile, w: &Profile, p: f64) -> f64 {
    let sum = u.lp_integral(p) + v.lp_integral(p);
    (w.lp_integral(p) - sum) / sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Arc<RadialGrid> {
        RadialGrid::new(3, 16.0, n).unwrap()
    }

    #[test]
    fn single_function_is_schwarz() {
        let g = grid(1025);
        let u = Profile::from_fn(g.clone(), |r| (-r * r / 2.0).exp());
        let w = shibata(&u, &Profile::zeros(g)).unwrap();
        for (j, x) in u.values().iter().enumerate() {
            assert!((w.values()[j] - x).abs() < 1e-12);
        }
        assert!(w.values()[u.values().len()..].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn plateaus_double_in_measure() {
        let g = grid(4097);
        let plate = |r: f64| if r < 3.0 { 1.0 } else if r < 3.01 { (3.01 - r) / 0.01 } else { 0.0 };
        let u = Profile::from_fn(g.clone(), plate);
        let w = shibata(&u, &u).unwrap();
        let radius = 2f64.powf(1.0 / 3.0) * 3.0;
        for (r, x) in w.grid().nodes().iter().zip(w.values()) {
            if *r < radius - 0.02 {
                assert!((x - 1.0).abs() < 1e-12);
            } else if *r > radius + 0.02 {
                assert_eq!(*x, 0.0);
            }
        }
    }

    #[test]
    fn masses_add_up() {
        let g = grid(2049);
        let u = Profile::from_fn(g.clone(), |r| (-r * r / 2.0).exp());
        let v = Profile::from_fn(g, |r| 0.5 * (-r * r / 5.0).exp() + 0.2 * (-r).exp());
        let w = shibata(&u, &v).unwrap();
        assert!(is_nonincreasing(w.values()));
        for p in [2.0, 2.5, 4.0] {
            assert!(norm_additivity_defect(&u, &v, &w, p).abs() < 1e-4, "p = {p}");
        }
        assert!(w.grad_norm_sq() < u.grad_norm_sq() + v.grad_norm_sq());
    }

    #[test]
    fn schwarz_sorts_and_is_idempotent() {
        let g = grid(513);
        let u = Profile::from_fn(g, |r| (-(r - 3.0).powi(2)).exp());
        let s = schwarz(&u).unwrap();
        assert!(is_nonincreasing(s.values()));
        assert!(((s.mass() - u.mass()) / u.mass()).abs() < 1e-2);
        assert_eq!(schwarz(&s).unwrap().values(), s.values());
    }

    #[test]
    fn negative_input_rejected() {
        let g = grid(129);
        let u = Profile::from_fn(g.clone(), |r| (2.0 - r) * (-r).exp());
        assert!(matches!(shibata(&u, &Profile::zeros(g)), Err(Error::NegativeInput { .. })));
    }

    #[test]
    fn power_identity_and_cross_term() {
        let g = grid(1025);
        let u = Profile::from_fn(g.clone(), |r| (-r * r / 2.0).exp());
        let v = Profile::from_fn(g.clone(), |r| 0.7 * (-r * r / 4.0).exp());
        assert_eq!(shibata_power_identity_check(&u, &v, 1.0).unwrap().max_deviation, 0.0);
        assert!(shibata_power_identity_check(&u, &v, 2.5).unwrap().max_deviation < 1e-4);
        let z = Profile::zeros(g.clone());
        let eq = cross_term_inequality_check(&u, &v, &z, &z, 1.5, 2.0).unwrap();
        assert!(eq.relative_slack.abs() < 1e-12, "{eq:?}");
        let far = Profile::from_fn(g, |r| (-(r * r) / 0.5).exp());
        let strict = cross_term_inequality_check(&u, &z, &z, &far, 1.5, 2.0).unwrap();
        assert!(strict.lhs == 0.0 && strict.rhs > 0.0);
    }
}
