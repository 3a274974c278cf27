//! Scalar ground states `-Laplacian w + w = w^{p-1}`, the scaled solitons
//! built from them, their levels and the sharp Gagliardo–Nirenberg constants.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Profile, RadialGrid};
use crate::linalg::{solve_tridiagonal, BandedMatrix};
use crate::model::{critical_exponent, gn_exponent, mass_critical_exponent};

/// Truncation radius of ground-state grids: `e^{-32} < 1e-13`.
pub const GROUND_R_MAX: f64 = 32.0;
/// Node count of ground-state grids (`h = 0.002`).
pub const GROUND_POINTS: usize = 16001;

/// Positive radial solution of `-Laplacian w + w = w^{p-1}` and its integrals.
#[derive(Debug, Clone)]
pub struct ScalarGroundState {
    pub dim: usize,
    pub p: f64,
    pub w0: Profile,
    /// `||grad w0||^2`.
    pub c0: f64,
    /// `||w0||_p^p`.
    pub c1: f64,
    /// `||w0||_2^2`.
    pub m0: f64,
    /// `max |-Laplacian w + w - w^{p-1}|` over interior nodes.
    pub residual: f64,
}

fn check_subcritical(dim: usize, p: f64) -> Result<()> {
    if dim == 0 {
        return Err(Error::param("N", "dimension must be positive"));
    }
    let crit = critical_exponent(dim);
    if !(p.is_finite() && p > 2.0 && p < crit) {
        return Err(Error::param("p", format!("{p} not in (2, {crit})")));
    }
    Ok(())
}

fn cache() -> &'static Mutex<HashMap<(usize, u64), Arc<ScalarGroundState>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<ScalarGroundState>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Ground state on the default grid, memoized per `(N, p)`.
pub fn ground_state(dim: usize, p: f64) -> Result<Arc<ScalarGroundState>> {
    check_subcritical(dim, p)?;
    let key = (dim, p.to_bits());
    let mut map = cache().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(gs) = map.get(&key) {
        return Ok(gs.clone());
    }
    let grid = RadialGrid::new(dim, GROUND_R_MAX, GROUND_POINTS)?;
    let init = Profile::from_fn(grid.clone(), |r| (-r * r / 4.0).exp());
    let gs = Arc::new(ground_state_from(&init, p)?);
    map.insert(key, gs.clone());
    Ok(gs)
}

/// Ground state on the grid of `initial`, starting from `initial` (any
/// positive bump).
pub fn ground_state_from(initial: &Profile, p: f64) -> Result<ScalarGroundState> {
    let grid = initial.grid().clone();
    let dim = grid.dim();
    check_subcritical(dim, p)?;
    if initial.values().iter().any(|v| *v < 0.0) || initial.sup_norm() == 0.0 {
        return Err(Error::param("initial", "must be a nonnegative nonzero profile"));
    }
    let mut w = initial.values().to_vec();
    petviashvili(&grid, p, &mut w)?;
    let residual = newton(&grid, p, &mut w)?;
    *w.last_mut().unwrap() = 0.0;
    if w[..w.len() - 1].iter().any(|v| *v <= 0.0) {
        return Err(Error::NoConvergence {
            context: format!("ground state N={dim} p={p} lost positivity"),
            iterations: 0,
            residual,
        });
    }
    let w0 = Profile::new(grid, w)?;
    Ok(ScalarGroundState {
        dim,
        p,
        c0: w0.grad_norm_sq(),
        c1: w0.lp_integral(p),
        m0: w0.mass(),
        w0,
        residual,
    })
}

/// Fixed-point iteration `w <- M^gamma (1 - Laplacian)^{-1} w^{p-1}` with the
/// stabilizing factor `M = <w,(1-Laplacian)w> / <w, w^{p-1}>`.
fn petviashvili(grid: &RadialGrid, p: f64, w: &mut [f64]) -> Result<()> {
    let n = grid.len() - 1;
    let wt = grid.weights();
    let flux = grid.flux();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for j in 0..n {
        diag[j] = wt[j] + flux[j] + if j > 0 { flux[j - 1] } else { 0.0 };
        if j > 0 {
            lower[j] = -flux[j - 1];
        }
        if j + 1 < n {
            upper[j] = -flux[j];
        }
    }
    let gamma = (p - 1.0) / (p - 2.0);
    let mut ku = vec![0.0; n + 1];
    for it in 0..2000 {
        grid.stiffness_apply(w, &mut ku);
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for j in 0..n {
            lhs += w[j] * (ku[j] + wt[j] * w[j]);
            rhs += wt[j] * w[j].max(0.0).powf(p);
        }
        if rhs <= 0.0 {
            return Err(Error::NoConvergence {
                context: "ground-state iteration collapsed to zero".into(),
                iterations: it,
                residual: f64::NAN,
            });
        }
        let m = lhs / rhs;
        let mut b: Vec<f64> = (0..n).map(|j| wt[j] * w[j].max(0.0).powf(p - 1.0)).collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut b)?;
        let scale = m.powf(gamma);
        let mut change = 0.0f64;
        let mut sup = 0.0f64;
        for j in 0..n {
            let v = scale * b[j];
            change = change.max((v - w[j]).abs());
            sup = sup.max(v.abs());
            w[j] = v;
        }
        w[n] = 0.0;
        if change <= 1e-9 * sup && (m - 1.0).abs() < 1e-9 {
            return Ok(());
        }
    }
    // Newton polishes whatever is left; only report if it also fails.
    Ok(())
}

/// Newton on the discrete equation; returns the final max-norm residual.
fn newton(grid: &RadialGrid, p: f64, w: &mut [f64]) -> Result<f64> {
    let n = grid.len() - 1;
    let wt = grid.weights();
    let flux = grid.flux();
    let mut ku = vec![0.0; n + 1];
    let residual_of = |w: &[f64], ku: &mut [f64], f: &mut Vec<f64>| {
        grid.stiffness_apply(w, ku);
        f.clear();
        let mut r = 0.0f64;
        for j in 0..n {
            let v = ku[j] + wt[j] * (w[j] - w[j].max(0.0).powf(p - 1.0));
            r = r.max((v / wt[j]).abs());
            f.push(v);
        }
        r
    };
    let mut f = Vec::with_capacity(n);
    let mut res = residual_of(w, &mut ku, &mut f);
    for _ in 0..40 {
        if res <= 1e-11 * w[0].abs().max(1.0) {
            break;
        }
        let mut jac = BandedMatrix::zeros(n, 1, 1);
        for j in 0..n {
            let mut d = wt[j] * (1.0 - (p - 1.0) * w[j].max(0.0).powf(p - 2.0));
            d += flux[j];
            if j > 0 {
                d += flux[j - 1];
                jac.add(j, j - 1, -flux[j - 1]);
            }
            if j + 1 < n {
                jac.add(j, j + 1, -flux[j]);
            }
            jac.add(j, j, d);
        }
        let lu = jac.factor()?;
        let mut step = f.clone();
        lu.solve(&mut step);
        let old: Vec<f64> = w[..n].to_vec();
        let mut t = 1.0;
        loop {
            for j in 0..n {
                w[j] = old[j] - t * step[j];
            }
            let r_new = residual_of(w, &mut ku, &mut f);
            if r_new < res || t < 1e-4 {
                res = r_new;
                break;
            }
            t *= 0.5;
        }
    }
    if res > 1e-8 {
        return Err(Error::NoConvergence {
            context: format!("ground state N={} p={p}", grid.dim()),
            iterations: 40,
            residual: res,
        });
    }
    Ok(res)
}

/// `w_{a,mu,p}(x) = (-lambda/mu)^{1/(p-2)} w0((-lambda)^{1/2} x)` with mass `a`.
#[derive(Debug, Clone)]
pub struct ScaledSoliton {
    pub a: f64,
    pub mu: f64,
    pub p: f64,
    pub lambda: f64,
    pub profile: Profile,
    pub grad_sq: f64,
    pub lp_norm_p: f64,
}

/// Exponent `(2p - N(p-2)) / (4 - N(p-2))` of the mass in the soliton norms.
pub fn mass_exponent(dim: usize, p: f64) -> f64 {
    let n = dim as f64;
    (2.0 * p - n * (p - 2.0)) / (4.0 - n * (p - 2.0))
}

/// Frequency `lambda < 0` of the soliton with mass `a`.
pub fn soliton_lambda(gs: &ScalarGroundState, a: f64, mu: f64) -> f64 {
    let n = gs.dim as f64;
    let p = gs.p;
    // (-lambda)^{2/(p-2) - N/2} = a mu^{2/(p-2)} / M0
    let kappa = 2.0 / (p - 2.0) - n / 2.0;
    -((a * mu.powf(2.0 / (p - 2.0)) / gs.m0).powf(1.0 / kappa))
}

/// Scaled soliton on the mass-supercritical branch `2 + 4/N < p < 2*`.
pub fn scaled_soliton(a: f64, mu: f64, p: f64, dim: usize) -> Result<ScaledSoliton> {
    if p <= mass_critical_exponent(dim) {
        return Err(Error::param(
            "p",
            format!("{p} is not mass-supercritical (needs p > {})", mass_critical_exponent(dim)),
        ));
    }
    scaled_soliton_any(a, mu, p, dim)
}

/// Scaled soliton for any `p != 2 + 4/N` (the mass map is invertible on both
/// sides of the critical exponent).
pub fn scaled_soliton_any(a: f64, mu: f64, p: f64, dim: usize) -> Result<ScaledSoliton> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::param("a", "mass must be positive"));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::param("mu", "must be positive"));
    }
    if p == mass_critical_exponent(dim) {
        return Err(Error::param("p", "mass-critical exponent: mass cannot be prescribed"));
    }
    let gs = ground_state(dim, p)?;
    let lambda = soliton_lambda(&gs, a, mu);
    let s = (-lambda).sqrt();
    let amp = (-lambda / mu).powf(1.0 / (p - 2.0));
    let grid = gs.w0.grid().scaled(1.0 / s)?;
    let values = gs.w0.values().iter().map(|v| amp * v).collect();
    let profile = Profile::new(grid, values)?;
    Ok(ScaledSoliton {
        a,
        mu,
        p,
        lambda,
        grad_sq: profile.grad_norm_sq(),
        lp_norm_p: profile.lp_integral(p),
        profile,
    })
}

/// Closed-form soliton norms `(||grad w||^2, ||w||_p^p)` for mass `a`.
pub fn soliton_norms(dim: usize, a: f64, mu: f64, p: f64) -> Result<(f64, f64)> {
    let gs = ground_state(dim, p)?;
    let n = dim as f64;
    let k = mass_exponent(dim, p);
    let e = 4.0 / (4.0 - n * (p - 2.0));
    let base = (a / gs.m0).powf(k);
    Ok((base * mu.powf(e) * gs.c0, base * mu.powf(e - 1.0) * gs.c1))
}

/// Least energy `l(N, a, mu, p) = I_{mu,p}(w_{a,mu,p})` in closed form.
pub fn level(dim: usize, a: f64, mu: f64, p: f64) -> Result<f64> {
    if p <= mass_critical_exponent(dim) {
        return Err(Error::param("p", format!("{p} is not mass-supercritical")));
    }
    let (g, l) = soliton_norms(dim, a, mu, p)?;
    Ok(0.5 * g - mu / p * l)
}

/// `I_{mu,p}(u) = ||grad u||^2/2 - mu/p ||u||_p^p`.
pub fn scalar_energy(u: &Profile, mu: f64, p: f64) -> f64 {
    0.5 * u.grad_norm_sq() - mu / p * u.lp_integral(p)
}

/// `I_{mu,p}(s * w)` and its `s`-derivative, where `s * w` is the dilation by
/// `t = e^s`.
pub fn dilation_energy(w: &Profile, mu: f64, p: f64, s: f64) -> (f64, f64) {
    dilation_energy_from(w.grad_norm_sq(), w.lp_integral(p), w.grid().dim(), mu, p, s)
}

/// Same as [`dilation_energy`] from the two integrals.
pub fn dilation_energy_from(grad: f64, lp: f64, dim: usize, mu: f64, p: f64, s: f64) -> (f64, f64) {
    let e = (p / 2.0 - 1.0) * dim as f64;
    let val = (2.0 * s).exp() / 2.0 * grad - mu / p * (e * s).exp() * lp;
    let der = (2.0 * s).exp() * grad - mu / p * e * (e * s).exp() * lp;
    (val, der)
}

/// Sharp Gagliardo–Nirenberg constant
/// `C(N,p) = ||w0||_p / (||grad w0||^alpha ||w0||_2^{1-alpha})`.
pub fn sharp_gn_constant(dim: usize, p: f64) -> Result<f64> {
    if p == 2.0 {
        return Ok(1.0);
    }
    let gs = ground_state(dim, p)?;
    let alpha = gn_exponent(dim, p)?;
    Ok(gs.c1.powf(1.0 / p) / (gs.c0.powf(alpha / 2.0) * gs.m0.powf((1.0 - alpha) / 2.0)))
}

/// GN quotient `||u||_p / (||grad u||^alpha ||u||^{1-alpha})` of a profile.
pub fn gn_quotient(u: &Profile, p: f64) -> Result<f64> {
    let alpha = gn_exponent(u.grid().dim(), p)?;
    Ok(u.lp_norm(p) / (u.grad_norm_sq().powf(alpha / 2.0) * u.mass().powf((1.0 - alpha) / 2.0)))
}

/// Summary emitted by the `scalar-ground` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundSummary {
    #[serde(rename = "N")]
    pub dim: usize,
    pub p: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "M0")]
    pub m0: f64,
    pub gn_constant: f64,
    pub residual: f64,
    pub w0_at_origin: f64,
}

pub fn ground_summary(dim: usize, p: f64) -> Result<GroundSummary> {
    let gs = ground_state(dim, p)?;
    Ok(GroundSummary {
        dim,
        p,
        c0: gs.c0,
        c1: gs.c1,
        m0: gs.m0,
        gn_constant: sharp_gn_constant(dim, p)?,
        residual: gs.residual,
        w0_at_origin: gs.w0.values()[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `((p/2) sech^2((p-2)x/2))^{1/(p-2)}`.
    fn sech_soliton(p: f64, x: f64) -> f64 {
        let c = 1.0 / ((p - 2.0) * x / 2.0).cosh();
        (p / 2.0 * c * c).powf(1.0 / (p - 2.0))
    }

    #[test]
    fn line_soliton_matches_sech() {
        for p in [3.0, 4.0, 5.0] {
            let gs = ground_state(1, p).unwrap();
            let err = gs
                .w0
                .grid()
                .nodes()
                .iter()
                .zip(gs.w0.values())
                .map(|(x, v)| (v - sech_soliton(p, *x)).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "p={p}: {err}");
        }
    }

    #[test]
    fn identities_n3() {
        for p in [2.5, 4.0] {
            let gs = ground_state(3, p).unwrap();
            let alpha = 3.0 * (p - 2.0) / (2.0 * p);
            assert!(((gs.c0 + gs.m0 - gs.c1) / gs.c1).abs() < 1e-5);
            assert!(((gs.c0 - alpha * gs.c1) / gs.c0).abs() < 1e-5);
            assert!(gs.residual <= 1e-8);
            let v = gs.w0.values();
            assert!(v[..v.len() - 1].iter().all(|x| *x > 0.0));
            assert!(v.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn gn_constant_line_p4() {
        // sqrt(2) sech: |w|_4^4 = 16/3, |w'|^2 = 4/3, |w|^2 = 4
        let exact = (16.0f64 / 3.0).powf(0.25) / ((4.0f64 / 3.0).powf(0.125) * 4.0f64.powf(0.375));
        let c = sharp_gn_constant(1, 4.0).unwrap();
        assert!((c - exact).abs() < 1e-6, "{c} {exact}");
        assert_eq!(sharp_gn_constant(3, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn soliton_scalings() {
        let (a, mu, p) = (1.7, 1.3, 4.0);
        let s = scaled_soliton(a, mu, p, 3).unwrap();
        assert!(((s.profile.mass() - a) / a).abs() < 1e-8);
        let (g, l) = soliton_norms(3, a, mu, p).unwrap();
        assert!(((s.grad_sq - g) / g).abs() < 1e-4);
        assert!(((s.lp_norm_p - l) / l).abs() < 1e-4);
        let lev = level(3, a, mu, p).unwrap();
        let direct = scalar_energy(&s.profile, mu, p);
        assert!(((lev - direct) / lev).abs() < 1e-4);
        // mu doubling
        let s2 = scaled_soliton(a, 2.0 * mu, p, 3).unwrap();
        let ratio = s2.grad_sq / s.grad_sq;
        let e = 4.0 / (4.0 - 3.0 * (p - 2.0));
        assert!((ratio - 2f64.powf(e)).abs() < 1e-9 * ratio);
        assert!(scaled_soliton(a, mu, 3.0, 3).is_err());
    }

    #[test]
    fn dilation_energy_signs() {
        let s = scaled_soliton(1.0, 1.0, 4.0, 3).unwrap();
        let (v0, d0) = dilation_energy(&s.profile, 1.0, 4.0, 0.0);
        assert!((v0 - scalar_energy(&s.profile, 1.0, 4.0)).abs() < 1e-12 * v0.abs());
        assert!(d0.abs() < 1e-5 * s.grad_sq);
        assert!(dilation_energy(&s.profile, 1.0, 4.0, -0.3).1 > 0.0);
        assert!(dilation_energy(&s.profile, 1.0, 4.0, 0.3).1 < 0.0);
    }
}
