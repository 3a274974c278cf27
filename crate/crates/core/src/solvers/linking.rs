//! Linking saddle under (H1): minimize, over deformations, the maximum of
//! the energy on the rectangle of component-wise dilations of two scalar
//! solitons.
//!
//! Dilations are parameterized logarithmically: `s * w = e^{Ns/2} w(e^s x)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{energy, Classification, SolutionRecord, StatePair};
use crate::error::{Error, Result};
use crate::grid::{Profile, RadialGrid};
use crate::model::{GeometryConstants, Params, Regime};
use crate::scalar::{level, scaled_soliton};

use super::descent::{descend, DescentConfig};
use super::mountain_pass::positive_components;
use super::{polish, SolverOptions, DECAY_LENGTHS};

const NEWTON_SWITCH: f64 = 1e-3;

/// `c(s, p) = max_{t >= 0} [t^{s-2} - t^{p-2}/p]` for `2 < s < p`, in closed
/// form `(p - s)/(p - 2) * (p (s - 2)/(p - 2))^{(s - 2)/(p - s)}`.
pub fn coupling_constant(s: f64, p: f64) -> f64 {
    (p - s) / (p - 2.0) * (p * (s - 2.0) / (p - 2.0)).powf((s - 2.0) / (p - s))
}

/// Everything the linking construction fixes before any deformation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkingSetup {
    /// `w_i = w_{a_i, mu_i + beta, p_i}` on a common grid.
    #[serde(skip)]
    pub solitons: Option<StatePair>,
    pub soliton_lambda: (f64, f64),
    /// `||grad w_i||^2`, `||w_i||_{p_i}^{p_i}`.
    pub soliton_grad: (f64, f64),
    pub soliton_lp: (f64, f64),
    pub c1: f64,
    pub c2: f64,
    pub beta1: f64,
    /// `l(N, a_i, mu_i, p_i)`.
    pub levels: (f64, f64),
    /// `l(a1, mu1 + beta) + l(a2, mu2 + beta) - beta (c1 a1 + c2 a2)`.
    pub lower_bound: f64,
    pub eps: f64,
    /// `M = [rho1, R1] x [rho2, R2]` in log-dilation coordinates.
    pub rect: [(f64, f64); 2],
}

impl LinkingSetup {
    pub fn max_level(&self) -> f64 {
        self.levels.0.max(self.levels.1)
    }

    fn solitons(&self) -> &StatePair {
        self.solitons.as_ref().expect("setup carries its solitons")
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let pos_lo = f(lo) > 0.0;
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if (f(m) > 0.0) == pos_lo {
            lo = m;
        } else {
            hi = m;
        }
        if hi - lo <= 1e-14 * (1.0 + m.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `beta1`: the root of `LB(beta) = max(l1, l2)`, `LB` as in
/// [`LinkingSetup::lower_bound`] (strictly decreasing in `beta`).
pub fn beta1(params: &Params) -> Result<f64> {
    let s = params.r1 + params.r2;
    let c1 = coupling_constant(s, params.p1);
    let c2 = coupling_constant(s, params.p2);
    let n = params.dim;
    let l1 = level(n, params.a1, params.mu1, params.p1)?;
    let l2 = level(n, params.a2, params.mu2, params.p2)?;
    let target = l1.max(l2);
    let lb = |b: f64| -> f64 {
        level(n, params.a1, params.mu1 + b, params.p1).unwrap()
            + level(n, params.a2, params.mu2 + b, params.p2).unwrap()
            - b * (c1 * params.a1 + c2 * params.a2)
            - target
    };
    let mut hi = 1.0;
    let mut guard = 0;
    while lb(hi) > 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Geometry("cannot bracket beta1".into()));
        }
    }
    Ok(bisect(lb, 0.0, hi))
}

/// Scalar dilation energy `I_mu(s * w)` from the integrals of `w`.
fn dilated_scalar(grad: f64, lp: f64, dim: usize, mu: f64, p: f64, s: f64) -> f64 {
    let pt = (p / 2.0 - 1.0) * dim as f64;
    0.5 * (2.0 * s).exp() * grad - mu / p * (pt * s).exp() * lp
}

/// Builds `w1, w2`, the constants `c_i`, `beta1`, `eps` and the rectangle.
pub fn linking_setup(params: &Params, constants: &GeometryConstants, opts: &SolverOptions) -> Result<LinkingSetup> {
    params.validate()?;
    if params.regime()? != Regime::H1 {
        return Err(Error::Regime("linking requires (H1)".into()));
    }
    if params.a1 <= 0.0 || params.a2 <= 0.0 {
        return Err(Error::param("a1", "linking needs two positive masses"));
    }
    let _ = constants;
    let n = params.dim;
    let b = params.beta;
    let beta1 = beta1(params)?;
    if !(b < beta1) {
        return Err(Error::Geometry(format!(
            "beta = {b} violates the linking threshold beta < beta1 = {beta1}; reduce beta below {beta1}"
        )));
    }
    let s = params.r1 + params.r2;
    let c1 = coupling_constant(s, params.p1);
    let c2 = coupling_constant(s, params.p2);
    let l1 = level(n, params.a1, params.mu1, params.p1)?;
    let l2 = level(n, params.a2, params.mu2, params.p2)?;
    let lower_bound = level(n, params.a1, params.mu1 + b, params.p1)? + level(n, params.a2, params.mu2 + b, params.p2)?
        - b * (c1 * params.a1 + c2 * params.a2);
    let eps = 0.5 * (lower_bound - l1.max(l2));
    let w1 = scaled_soliton(params.a1, params.mu1 + b, params.p1, n)?;
    let w2 = scaled_soliton(params.a2, params.mu2 + b, params.p2, n)?;
    let mut rect = [(0.0, 0.0); 2];
    for (i, (w, mu, p)) in [(&w1, params.mu1, params.p1), (&w2, params.mu2, params.p2)].into_iter().enumerate() {
        let f = |s: f64| dilated_scalar(w.grad_sq, w.lp_norm_p, n, mu, p, s);
        // rho_i < 0 with 0 < I(rho_i * w_i) < eps; I -> 0+ as s -> -inf
        let rho = if f(0.0) > 0.5 * eps {
            let mut lo = -1.0;
            while f(lo) > 0.5 * eps {
                lo *= 2.0;
            }
            bisect(|s| f(s) - 0.5 * eps, lo, 0.0)
        } else {
            -1.0
        };
        // R_i > 0 beyond the zero of I(s * w_i)
        let pt = (p / 2.0 - 1.0) * n as f64;
        let zero = (p * w.grad_sq / (2.0 * mu * w.lp_norm_p)).ln() / (pt - 2.0);
        rect[i] = (rho, zero.max(0.0) + 0.25);
    }
    let lam_min = (-w1.lambda).min(-w2.lambda);
    let r_max = opts.r_max.unwrap_or(DECAY_LENGTHS / lam_min.sqrt());
    // geometry checks run at the fine resolution
    let grid = RadialGrid::new(n, r_max, opts.final_n)?;
    let mut sol = StatePair::new(w1.profile.resample(&grid)?, w2.profile.resample(&grid)?)?;
    sol.normalize_masses(params.a1, params.a2)?;
    Ok(LinkingSetup {
        soliton_lambda: (w1.lambda, w2.lambda),
        soliton_grad: (w1.grad_sq, w2.grad_sq),
        soliton_lp: (w1.lp_norm_p, w2.lp_norm_p),
        solitons: Some(sol),
        c1,
        c2,
        beta1,
        levels: (l1, l2),
        lower_bound,
        eps,
        rect,
    })
}

/// `int |s1 * u1|^{r1} |s2 * u2|^{r2}` for component-wise dilations, by
/// quadrature on the nodes of the narrower component.
pub fn cross_dilated(state: &StatePair, s1: f64, s2: f64, r1: f64, r2: f64) -> f64 {
    let grid = state.grid();
    let n = grid.dim() as f64;
    let (k, l, sk, sl, rk, rl) = if s1 >= s2 {
        (0, 1, s1, s2, r1, r2)
    } else {
        (1, 0, s2, s1, r2, r1)
    };
    let uk = state.component(k).values();
    let args: Vec<f64> = grid.nodes().iter().map(|y| (sl - sk).exp() * y).collect();
    let ul = state.component(l).interpolant().eval_sorted(&args);
    let w = grid.weights();
    let mut sum = 0.0;
    for j in 0..uk.len() {
        let (a, b) = (uk[j].abs(), ul[j].abs());
        if a > 0.0 && b > 0.0 {
            sum += w[j] * a.powf(rk) * b.powf(rl);
        }
    }
    (n * (s1 * r1 + s2 * r2) / 2.0 - n * sk).exp() * sum
}

/// Applies `(s1 * u1, s2 * u2)`, represented on the grid of the wider
/// component (exact for it, interpolated for the other).
pub fn dilate_components(state: &StatePair, s1: f64, s2: f64) -> Result<StatePair> {
    let (k, l, sk, sl) = if s1 <= s2 { (0, 1, s1, s2) } else { (1, 0, s2, s1) };
    let wide = state.component(k).dilate_exact(sk.exp())?;
    let grid = wide.grid().clone();
    let n = grid.dim() as f64;
    let args: Vec<f64> = state.grid().nodes().iter().map(|y| (sl - sk).exp() * y).collect();
    let c = (n * sl / 2.0).exp();
    let mut narrow: Vec<f64> = state.component(l).interpolant().eval_sorted(&args).into_iter().map(|v| c * v).collect();
    *narrow.last_mut().unwrap() = 0.0;
    let narrow = Profile::new(grid.clone(), narrow)?;
    if k == 0 {
        StatePair::new(wide, narrow)
    } else {
        StatePair::new(narrow, wide)
    }
}

/// The energy on the dilation plane of a state.
struct Plane<'a> {
    params: &'a Params,
    state: &'a StatePair,
    grad: [f64; 2],
    lp: [f64; 2],
}

impl<'a> Plane<'a> {
    fn new(state: &'a StatePair, params: &'a Params) -> Self {
        Self {
            params,
            state,
            grad: [state.u1.grad_norm_sq(), state.u2.grad_norm_sq()],
            lp: [state.u1.lp_integral(params.p1), state.u2.lp_integral(params.p2)],
        }
    }

    fn scalar(&self, i: usize, s: f64) -> (f64, f64, f64) {
        let p = if i == 0 { self.params.p1 } else { self.params.p2 };
        let mu = if i == 0 { self.params.mu1 } else { self.params.mu2 };
        let pt = (p / 2.0 - 1.0) * self.params.dim as f64;
        let e2 = (2.0 * s).exp() * self.grad[i];
        let ep = mu / p * (pt * s).exp() * self.lp[i];
        (0.5 * e2 - ep, e2 - pt * ep, 2.0 * e2 - pt * pt * ep)
    }

    fn cross(&self, s1: f64, s2: f64) -> f64 {
        if self.params.beta == 0.0 {
            0.0
        } else {
            self.params.beta * cross_dilated(self.state, s1, s2, self.params.r1, self.params.r2)
        }
    }

    fn value(&self, s: [f64; 2]) -> f64 {
        self.scalar(0, s[0]).0 + self.scalar(1, s[1]).0 - self.cross(s[0], s[1])
    }

    /// Value, gradient and Hessian; the coupling part by central differences.
    fn jet(&self, s: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let (a0, a1, a2) = self.scalar(0, s[0]);
        let (b0, b1, b2) = self.scalar(1, s[1]);
        let h = 1e-3;
        let x = |d0: f64, d1: f64| self.cross(s[0] + d0, s[1] + d1);
        let x00 = x(0.0, 0.0);
        let (xp0, xm0, x0p, x0m) = (x(h, 0.0), x(-h, 0.0), x(0.0, h), x(0.0, -h));
        let xpp = x(h, h);
        let xmm = x(-h, -h);
        let xpm = x(h, -h);
        let xmp = x(-h, h);
        let g = [a1 - (xp0 - xm0) / (2.0 * h), b1 - (x0p - x0m) / (2.0 * h)];
        let h00 = a2 - (xp0 - 2.0 * x00 + xm0) / (h * h);
        let h11 = b2 - (x0p - 2.0 * x00 + x0m) / (h * h);
        let h01 = -(xpp - xpm - xmp + xmm) / (4.0 * h * h);
        (a0 + b0 - x00, g, [[h00, h01], [h01, h11]])
    }
}

/// Maximizes `J(s1 * u1, s2 * u2)` over the plane by damped Newton, from
/// the origin. Returns the maximizer and the maximum.
pub fn plane_peak(state: &StatePair, params: &Params) -> Result<([f64; 2], f64)> {
    let plane = Plane::new(state, params);
    let scale = plane.grad[0] + plane.grad[1];
    let mut s = [0.0; 2];
    let (mut v, mut g, mut hs) = plane.jet(s);
    for _ in 0..100 {
        if (g[0].abs() + g[1].abs()) <= 1e-11 * scale {
            return Ok((s, v));
        }
        let det = hs[0][0] * hs[1][1] - hs[0][1] * hs[1][0];
        let neg_def = hs[0][0] < 0.0 && det > 0.0;
        let mut d = if neg_def {
            [
                -(hs[1][1] * g[0] - hs[0][1] * g[1]) / det,
                -(hs[0][0] * g[1] - hs[1][0] * g[0]) / det,
            ]
        } else {
            // ascent along the gradient scaled by the diagonal curvature
            [g[0] / hs[0][0].abs().max(scale), g[1] / hs[1][1].abs().max(scale)]
        };
        let len = d[0].abs().max(d[1].abs());
        if len > 1.0 {
            d = [d[0] / len, d[1] / len];
        }
        let mut t = 1.0;
        loop {
            let trial = [s[0] + t * d[0], s[1] + t * d[1]];
            let vt = plane.value(trial);
            if vt >= v - 1e-15 * v.abs() {
                s = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                return Ok((s, v));
            }
        }
        (v, g, hs) = plane.jet(s);
    }
    if (g[0].abs() + g[1].abs()) <= 1e-8 * scale {
        Ok((s, v))
    } else {
        Err(Error::Geometry("no maximum of the energy on the dilation plane".into()))
    }
}

fn to_plane_peak(st: StatePair, params: &Params) -> Result<StatePair> {
    let (s, _) = plane_peak(&st, params)?;
    if s[0].abs() < 1e-13 && s[1].abs() < 1e-13 {
        return Ok(st);
    }
    let mut out = dilate_components(&st, s[0], s[1])?;
    out.normalize_masses(params.a1, params.a2)?;
    Ok(out)
}

/// One tested deformation `g(t) = (t_i * normalize((1 - chi) w_i + chi v_i))`
/// with `chi` a bump vanishing on the boundary of `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeCheck {
    pub seed: u64,
    pub amplitude: f64,
    /// Winding number of `F_g` along the boundary of `M`.
    pub winding: i32,
    pub zero: Option<(f64, f64)>,
    /// Normalized `|F_g|` at the reported zero.
    pub residual: f64,
}

/// Boundary bound and degree checks of the linking geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkingReport {
    pub boundary_sup: f64,
    /// `max(l1, l2) + eps`.
    pub boundary_bound: f64,
    pub boundary_ok: bool,
    /// Maximum of `J(g0)` over `M` (upper end of the level bracket).
    pub upper_bound: f64,
    pub degree_checks: Vec<DegreeCheck>,
    pub all_zeros_found: bool,
}

/// `sup_{boundary of M} J(g0)` sampled with `per_edge` points per edge.
pub fn boundary_sup(setup: &LinkingSetup, params: &Params, per_edge: usize) -> f64 {
    let plane = Plane::new(setup.solitons(), params);
    let [(a0, b0), (a1, b1)] = setup.rect;
    let mut sup = f64::NEG_INFINITY;
    for k in 0..per_edge {
        let x = k as f64 / (per_edge - 1) as f64;
        let t0 = a0 + x * (b0 - a0);
        let t1 = a1 + x * (b1 - a1);
        for s in [[t0, a1], [t0, b1], [a0, t1], [b0, t1]] {
            sup = sup.max(plane.value(s));
        }
    }
    sup
}

/// A random positive profile: a mixture of Gaussians on the soliton's
/// length scale.
fn random_profile(grid: &Arc<RadialGrid>, length: f64, rng: &mut ChaCha8Rng) -> Profile {
    let terms: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(0.2..1.0), length * rng.gen_range(0.3..2.0)))
        .collect();
    Profile::from_fn(grid.clone(), move |r| {
        terms.iter().map(|(c, s)| c * (-(r / s).powi(2)).exp()).sum()
    })
}

/// `F_g` of the deformation, normalized component-wise by the kinetic term
/// (a positive factor, so zeros and winding are unchanged).
struct Deformation<'a> {
    params: &'a Params,
    base: &'a StatePair,
    bumps: StatePair,
    amplitude: f64,
    rect: [(f64, f64); 2],
}

impl Deformation<'_> {
    fn chi(&self, t: [f64; 2]) -> f64 {
        let mut c = self.amplitude;
        for i in 0..2 {
            let (a, b) = self.rect[i];
            let x = ((t[i] - a) / (b - a)).clamp(0.0, 1.0);
            c *= (std::f64::consts::PI * x).sin();
        }
        c.max(0.0)
    }

    fn field(&self, t: [f64; 2]) -> [f64; 2] {
        let chi = self.chi(t);
        let mut out = [0.0; 2];
        let pr = self.params;
        for i in 0..2 {
            let (a, p, mu) = if i == 0 { (pr.a1, pr.p1, pr.mu1) } else { (pr.a2, pr.p2, pr.mu2) };
            let w = self.base.component(i).values();
            let v = self.bumps.component(i).values();
            let h: Vec<f64> = w.iter().zip(v).map(|(x, y)| (1.0 - chi) * x + chi * y).collect();
            let mut h = Profile::new(self.base.grid().clone(), h).expect("finite mixture");
            h.scale((a / h.mass()).sqrt());
            let pt = (p / 2.0 - 1.0) * pr.dim as f64;
            let ratio = (mu + pr.beta) / p * pt * h.lp_integral(p) / h.grad_norm_sq();
            out[i] = 1.0 - ratio * ((pt - 2.0) * t[i]).exp();
        }
        out
    }

    fn winding(&self, per_edge: usize) -> i32 {
        let [(a0, b0), (a1, b1)] = self.rect;
        let corners = [[a0, a1], [b0, a1], [b0, b1], [a0, b1], [a0, a1]];
        let mut total = 0.0;
        let mut prev: Option<f64> = None;
        for e in 0..4 {
            let (p, q) = (corners[e], corners[e + 1]);
            for k in 0..per_edge {
                let x = k as f64 / per_edge as f64;
                let t = [p[0] + x * (q[0] - p[0]), p[1] + x * (q[1] - p[1])];
                let f = self.field(t);
                let ang = f[1].atan2(f[0]);
                if let Some(pa) = prev {
                    let mut d = ang - pa;
                    while d > std::f64::consts::PI {
                        d -= 2.0 * std::f64::consts::PI;
                    }
                    while d < -std::f64::consts::PI {
                        d += 2.0 * std::f64::consts::PI;
                    }
                    total += d;
                }
                prev = Some(ang);
            }
        }
        let f = self.field(corners[0]);
        let mut d = f[1].atan2(f[0]) - prev.unwrap();
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        total += d;
        (total / (2.0 * std::f64::consts::PI)).round() as i32
    }

    /// Interior zero: best point of a 41 x 41 sample, then Newton with a
    /// finite-difference Jacobian, kept inside `M`.
    fn find_zero(&self) -> (Option<(f64, f64)>, f64) {
        let [(a0, b0), (a1, b1)] = self.rect;
        let norm = |f: [f64; 2]| f[0].hypot(f[1]);
        let mut best = ([0.0, 0.0], f64::INFINITY);
        for i in 1..40 {
            for j in 1..40 {
                let t = [a0 + (b0 - a0) * i as f64 / 40.0, a1 + (b1 - a1) * j as f64 / 40.0];
                let r = norm(self.field(t));
                if r < best.1 {
                    best = (t, r);
                }
            }
        }
        let (mut t, mut r) = best;
        for _ in 0..60 {
            if r < 1e-12 {
                break;
            }
            let f = self.field(t);
            let h = 1e-6;
            let fx = self.field([t[0] + h, t[1]]);
            let fy = self.field([t[0], t[1] + h]);
            let j = [[(fx[0] - f[0]) / h, (fy[0] - f[0]) / h], [(fx[1] - f[1]) / h, (fy[1] - f[1]) / h]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let d = [
                -(j[1][1] * f[0] - j[0][1] * f[1]) / det,
                -(j[0][0] * f[1] - j[1][0] * f[0]) / det,
            ];
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-6 {
                let trial = [
                    (t[0] + step * d[0]).clamp(a0, b0),
                    (t[1] + step * d[1]).clamp(a1, b1),
                ];
                let rt = norm(self.field(trial));
                if rt < r {
                    t = trial;
                    r = rt;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let inside = t[0] > a0 && t[0] < b0 && t[1] > a1 && t[1] < b1;
        ((r < 1e-9 && inside).then_some((t[0], t[1])), r)
    }
}

/// Runs the degree check on `count` random deformations (the first one is
/// `g0` itself).
pub fn degree_checks(setup: &LinkingSetup, params: &Params, count: usize, seed: u64) -> Vec<DegreeCheck> {
    let base = setup.solitons();
    let grid = base.grid().clone();
    let lengths = [
        1.0 / (-setup.soliton_lambda.0).sqrt(),
        1.0 / (-setup.soliton_lambda.1).sqrt(),
    ];
    (0..count)
        .map(|k| {
            let s = seed.wrapping_add(k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let amplitude = if k == 0 { 0.0 } else { rng.gen_range(0.2..1.0) };
            let bumps = StatePair {
                u1: random_profile(&grid, lengths[0], &mut rng),
                u2: random_profile(&grid, lengths[1], &mut rng),
            };
            let d = Deformation {
                params,
                base,
                bumps,
                amplitude,
                rect: setup.rect,
            };
            let winding = d.winding(200);
            let (zero, residual) = d.find_zero();
            DegreeCheck {
                seed: s,
                amplitude,
                winding,
                zero,
                residual,
            }
        })
        .collect()
}

/// Boundary bound, level bracket and degree checks for a setup.
pub fn linking_geometry(setup: &LinkingSetup, params: &Params, deformations: usize, seed: u64) -> Result<LinkingReport> {
    let boundary_sup = boundary_sup(setup, params, 401);
    let boundary_bound = setup.max_level() + setup.eps;
    let (_, upper_bound) = plane_peak(setup.solitons(), params)?;
    let checks = degree_checks(setup, params, deformations, seed);
    let all = checks.iter().all(|c| c.zero.is_some() && c.winding != 0);
    Ok(LinkingReport {
        boundary_sup,
        boundary_bound,
        boundary_ok: boundary_sup < boundary_bound,
        upper_bound,
        degree_checks: checks,
        all_zeros_found: all,
    })
}

/// Linking critical point at level `c(a1, a2)`, with the geometry report.
pub fn linking_solve(
    params: &Params,
    constants: &GeometryConstants,
    opts: &SolverOptions,
) -> Result<(SolutionRecord, LinkingReport)> {
    if params.dim < 2 {
        return Err(Error::param("N", "the linking solver needs N >= 2 (radial compactness)"));
    }
    let setup = linking_setup(params, constants, opts)?;
    let report = linking_geometry(&setup, params, 4, opts.seed)?;
    if !report.boundary_ok {
        return Err(Error::Geometry(format!(
            "boundary bound violated: sup {} >= {}",
            report.boundary_sup, report.boundary_bound
        )));
    }
    let cfg = DescentConfig {
        max_iter: opts.max_iter,
        stop_residual: NEWTON_SWITCH.min(opts.tol * 100.0).max(opts.tol),
        grid_n: opts.grid_n,
        r_max: opts.r_max,
        ball: None,
    };
    let start = super::descent::regrid(setup.solitons(), setup.solitons().grid().r_max(), opts.grid_n, params)?;
    let out = descend(start, params, &cfg, |s| to_plane_peak(s, params))?;
    log::info!(
        "linking descent: {} iterations, residual {:e}, peak {:.10e}",
        out.iterations,
        out.residual,
        energy(&out.state, params)
    );
    let (state, newton_its, removed) = polish(out.state, params, opts, |s| to_plane_peak(s, params))?;
    let rec = SolutionRecord::from_state(
        state,
        *params,
        *constants,
        Classification::Linking,
        out.iterations + newton_its,
        out.projection.max(removed),
    );
    let lo = report.boundary_bound;
    let hi = report.upper_bound;
    if !(rec.energy > lo && rec.energy <= hi * (1.0 + 1e-6)) {
        return Err(Error::Geometry(format!(
            "linking energy {} outside the bracket ({lo}, {hi}]",
            rec.energy
        )));
    }
    positive_components(&rec)?;
    rec.certify(opts.tol)?;
    Ok((rec, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_constant_matches_grid_max() {
        for (s, p) in [(2.8, 4.0), (3.0, 5.0), (2.2, 3.5)] {
            let mut best = 0.0f64;
            let mut t: f64 = 1e-4;
            while t < 1e3 {
                best = best.max(t.powf(s - 2.0) - t.powf(p - 2.0) / p);
                t *= 1.0 + 1e-5;
            }
            assert!((coupling_constant(s, p) - best).abs() < 1e-8, "{s} {p}");
        }
    }

    #[test]
    fn plane_peak_without_coupling_is_scalar_peak() {
        let w = scaled_soliton(1.0, 1.5, 4.0, 3).unwrap();
        let grid = w.profile.grid().clone();
        let st = StatePair::new(w.profile.clone(), Profile::new(grid, w.profile.values().to_vec()).unwrap()).unwrap();
        let params = Params {
            dim: 3,
            p1: 4.0,
            p2: 4.0,
            r1: 1.4,
            r2: 1.4,
            mu1: 1.0,
            mu2: 1.0,
            beta: 0.0,
            a1: 1.0,
            a2: 1.0,
        };
        let (s, v) = plane_peak(&st, &params).unwrap();
        let l = level(3, 1.0, 1.0, 4.0).unwrap();
        assert!(((v - 2.0 * l) / l).abs() < 1e-4, "{v} {l}");
        assert!((s[0] - s[1]).abs() < 1e-8 && s[0] > 0.0);
    }

    #[test]
    fn cross_dilated_matches_resampled_quadrature() {
        let grid = RadialGrid::new(3, 20.0, 8193).unwrap();
        let st = StatePair::new(
            Profile::from_fn(grid.clone(), |r| (-r * r / 2.0).exp()),
            Profile::from_fn(grid.clone(), |r| (-r * r / 3.0).exp()),
        )
        .unwrap();
        let (s1, s2, r1, r2) = (0.3, -0.2, 1.4, 1.6);
        let got = cross_dilated(&st, s1, s2, r1, r2);
        // closed form: e^{N(s1 r1 + s2 r2)/2} int exp(-(r1 e^{2 s1}/2 + r2 e^{2 s2}/3) r^2)
        let c = r1 * (2.0 * s1).exp() / 2.0 + r2 * (2.0 * s2).exp() / 3.0;
        let exact = (3.0 * (s1 * r1 + s2 * r2) / 2.0).exp() * (std::f64::consts::PI / c).powf(1.5);
        assert!(((got - exact) / exact).abs() < 1e-6, "{got} {exact}");
        let d = dilate_components(&st, s1, s2).unwrap();
        let direct = crate::grid::mixed_term(&d.u1, &d.u2, r1, r2).unwrap();
        assert!(((direct - exact) / exact).abs() < 1e-5);
    }
}
