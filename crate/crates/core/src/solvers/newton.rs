//! Newton's method on the augmented system
//! `K u_i - W f_i(u) - lambda_i W u_i = 0`, `|u_i|^2 = a_i`
//! with the multipliers as unknowns.
//!
//! The two components are interleaved node by node, so the Jacobian is a
//! band matrix of half-width 2; the two mass rows/columns are eliminated
//! with a 2x2 Schur complement.

use crate::energy::{forces, residuals, StatePair};
use crate::error::{Error, Result};
use crate::linalg::BandedMatrix;
use crate::model::Params;

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Stop once the relative strong residual drops below this.
    pub tol: f64,
    /// Accept the result only if the dual gradient residual is below this.
    pub residual_limit: f64,
    /// Give up (so the caller can fall back to descent) above this pivot
    /// ratio.
    pub cond_limit: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 30,
            tol: 1e-12,
            residual_limit: 1e-7,
            cond_limit: 1e12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub state: StatePair,
    pub lambda: (f64, f64),
    pub iterations: usize,
    pub residual: f64,
}

/// Derivatives of the forces: `(df1/du1, df1/du2, df2/du2)`.
fn force_jacobian(params: &Params, u1: f64, u2: f64) -> (f64, f64, f64) {
    let (a1, a2) = (u1.abs(), u2.abs());
    let pw = |x: f64, e: f64| if x == 0.0 { 0.0 } else { x.powf(e) };
    let mut d11 = params.mu1 * (params.p1 - 1.0) * pw(a1, params.p1 - 2.0);
    let mut d22 = params.mu2 * (params.p2 - 1.0) * pw(a2, params.p2 - 2.0);
    let mut d12 = 0.0;
    if params.beta != 0.0 && a1 > 0.0 && a2 > 0.0 {
        let (r1, r2, b) = (params.r1, params.r2, params.beta);
        d11 += b * r1 * (r1 - 1.0) * a1.powf(r1 - 2.0) * a2.powf(r2);
        d22 += b * r2 * (r2 - 1.0) * a2.powf(r2 - 2.0) * a1.powf(r1);
        d12 = b * r1 * r2 * a1.powf(r1 - 1.0) * a2.powf(r2 - 1.0) * u1.signum() * u2.signum();
    }
    let fix = |x: f64| if x.is_finite() { x } else { 0.0 };
    (fix(d11), fix(d12), fix(d22))
}

struct Layout {
    comps: Vec<usize>,
    m: usize,
}

impl Layout {
    fn k(&self) -> usize {
        self.comps.len()
    }
    fn idx(&self, j: usize, slot: usize) -> usize {
        j * self.k() + slot
    }
}

/// Residual `F` (stacked, interleaved) and mass defects `G`.
fn residual(
    state: &StatePair,
    params: &Params,
    lam: [f64; 2],
    masses: [f64; 2],
    lay: &Layout,
) -> (Vec<f64>, Vec<f64>) {
    let grid = state.grid();
    let w = grid.weights();
    let n = grid.len();
    let mut ku = [vec![0.0; n], vec![0.0; n]];
    grid.stiffness_apply(state.u1.values(), &mut ku[0]);
    grid.stiffness_apply(state.u2.values(), &mut ku[1]);
    let (v1, v2) = (state.u1.values(), state.u2.values());
    let mut f = vec![0.0; lay.m * lay.k()];
    for j in 0..lay.m {
        let (f1, f2) = forces(params, v1[j], v2[j]);
        for (slot, &c) in lay.comps.iter().enumerate() {
            let (fc, uc) = if c == 0 { (f1, v1[j]) } else { (f2, v2[j]) };
            f[lay.idx(j, slot)] = ku[c][j] - w[j] * fc - lam[c] * w[j] * uc;
        }
    }
    let g = lay
        .comps
        .iter()
        .map(|&c| -0.5 * (state.component(c).mass() - masses[c]))
        .collect();
    (f, g)
}

fn merit(f: &[f64], g: &[f64], w: &[f64], k: usize, scale: f64) -> f64 {
    let mut s = 0.0;
    for (i, v) in f.iter().enumerate() {
        s += v * v / w[i / k];
    }
    s / scale + g.iter().map(|x| x * x).sum::<f64>()
}

/// Refines an approximate constrained critical point. Components with zero
/// prescribed mass are held at zero.
pub fn newton_refine(
    state: &StatePair,
    params: &Params,
    lambda0: (f64, f64),
    opts: &NewtonOptions,
) -> Result<NewtonOutcome> {
    let grid = state.grid().clone();
    let n = grid.len();
    let comps: Vec<usize> = [(0, params.a1), (1, params.a2)]
        .into_iter()
        .filter(|(_, a)| *a > 0.0)
        .map(|(c, _)| c)
        .collect();
    if comps.is_empty() {
        return Err(Error::param("a1", "both masses are zero"));
    }
    let lay = Layout { comps, m: n - 1 };
    let k = lay.k();
    let masses = [params.a1, params.a2];
    let w = grid.weights().to_vec();
    let flux = grid.flux().to_vec();
    let mut st = state.clone();
    for c in 0..2 {
        if masses[c] == 0.0 {
            st.component_mut(c).scale(0.0);
        }
    }
    let mut lam = [lambda0.0, lambda0.1];
    // normalize the merit by the size of the kinetic term
    let scale = (st.kinetic() + 1e-300).max(1e-300);
    let (mut f, mut g) = residual(&st, params, lam, masses, &lay);
    let mut phi = merit(&f, &g, &w, k, scale);
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it;
        if phi.sqrt() <= opts.tol {
            break;
        }
        let dim = lay.m * k;
        let mut a = BandedMatrix::zeros(dim, k, k);
        let (v1, v2) = (st.u1.values().to_vec(), st.u2.values().to_vec());
        for j in 0..lay.m {
            let (d11, d12, d22) = force_jacobian(params, v1[j], v2[j]);
            for (slot, &c) in lay.comps.iter().enumerate() {
                let row = lay.idx(j, slot);
                let dcc = if c == 0 { d11 } else { d22 };
                let mut diag = flux[j] - w[j] * dcc - lam[c] * w[j];
                if j > 0 {
                    diag += flux[j - 1];
                    a.add(row, lay.idx(j - 1, slot), -flux[j - 1]);
                }
                if j + 1 < lay.m {
                    a.add(row, lay.idx(j + 1, slot), -flux[j]);
                }
                a.add(row, row, diag);
                if k == 2 {
                    let other = 1 - slot;
                    a.add(row, lay.idx(j, other), -w[j] * d12);
                }
            }
        }
        let lu = a.factor()?;
        if lu.pivot_ratio() > opts.cond_limit {
            return Err(Error::Singular(format!(
                "Newton Jacobian pivot ratio {:e} exceeds {:e}",
                lu.pivot_ratio(),
                opts.cond_limit
            )));
        }
        // border columns b_c = -W u_c
        let mut xs: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut bs: Vec<Vec<f64>> = Vec::with_capacity(k);
        for (slot, &c) in lay.comps.iter().enumerate() {
            let uc = st.component(c).values();
            let mut b = vec![0.0; dim];
            for j in 0..lay.m {
                b[lay.idx(j, slot)] = -w[j] * uc[j];
            }
            let mut x = b.clone();
            lu.solve(&mut x);
            bs.push(b);
            xs.push(x);
        }
        let mut y = f.clone();
        lu.solve(&mut y);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut s = [[0.0; 2]; 2];
        let mut rhs = [0.0; 2];
        for c in 0..k {
            for d in 0..k {
                s[c][d] = dot(&bs[c], &xs[d]);
            }
            rhs[c] = g[c] - dot(&bs[c], &y);
        }
        let dlam = if k == 1 {
            [rhs[0] / s[0][0], 0.0]
        } else {
            let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
            if det == 0.0 || !det.is_finite() {
                return Err(Error::Singular("Newton Schur complement".into()));
            }
            [
                (rhs[0] * s[1][1] - rhs[1] * s[0][1]) / det,
                (s[0][0] * rhs[1] - s[1][0] * rhs[0]) / det,
            ]
        };
        let mut du = y.iter().map(|v| -v).collect::<Vec<f64>>();
        for c in 0..k {
            for (d, x) in du.iter_mut().zip(&xs[c]) {
                *d -= x * dlam[c];
            }
        }
        // damped update
        let umax = lay
            .comps
            .iter()
            .map(|&c| st.component(c).sup_norm())
            .fold(0.0, f64::max);
        let dmax = du.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut t = 1.0;
        let base = st.clone();
        let base_lam = lam;
        let mut accepted = false;
        while t >= 1.0 / 64.0 {
            let mut trial = base.clone();
            for (slot, &c) in lay.comps.iter().enumerate() {
                let v = trial.component_mut(c).values_mut();
                for j in 0..lay.m {
                    v[j] += t * du[lay.idx(j, slot)];
                }
            }
            let mut tl = base_lam;
            for (slot, &c) in lay.comps.iter().enumerate() {
                tl[c] += t * dlam[slot];
            }
            let (f2, g2) = residual(&trial, params, tl, masses, &lay);
            let phi2 = merit(&f2, &g2, &w, k, scale);
            if phi2.is_finite() && phi2 < phi {
                st = trial;
                lam = tl;
                f = f2;
                g = g2;
                phi = phi2;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations = it + 1;
        // at the rounding floor the merit can no longer decrease
        if t * dmax <= 1e-10 * umax || (!accepted && dmax <= 1e-7 * umax) {
            break;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                context: "Newton line search stalled".into(),
                iterations,
                residual: phi.sqrt(),
            });
        }
    }
    let grad_res = residuals(&st, params).grad;
    if !(grad_res <= opts.residual_limit) {
        return Err(Error::NoConvergence {
            context: "Newton refinement".into(),
            iterations,
            residual: grad_res,
        });
    }
    Ok(NewtonOutcome {
        state: st,
        lambda: (lam[0], lam[1]),
        iterations,
        residual: phi.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Profile;
    use crate::scalar::scaled_soliton;

    #[test]
    fn decoupled_solitons_are_fixed_points() {
        // beta = 0: (w1, w2) with equal widths solves the system exactly
        let s = scaled_soliton(1.0, 1.0, 4.0, 3).unwrap();
        let grid = s.profile.grid().clone();
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
        let state = StatePair::new(s.profile.clone(), Profile::new(grid, s.profile.values().to_vec()).unwrap()).unwrap();
        let out = newton_refine(&state, &params, (s.lambda * 0.9, s.lambda * 1.1), &NewtonOptions::default()).unwrap();
        assert!(((out.lambda.0 - s.lambda) / s.lambda).abs() < 1e-4);
        let r = residuals(&out.state, &params);
        assert!(r.grad < 1e-8 && r.pohozaev < 1e-5);
    }

    #[test]
    fn recovers_from_perturbed_guess() {
        let s = scaled_soliton(1.0, 1.0, 4.0, 3).unwrap();
        let grid = s.profile.grid().clone();
        let params = Params {
            dim: 3,
            p1: 4.0,
            p2: 4.0,
            r1: 1.4,
            r2: 1.4,
            mu1: 1.0,
            mu2: 1.0,
            beta: 0.05,
            a1: 1.0,
            a2: 1.0,
        };
        let bump = |r: f64| 1.0 + 0.05 * (-r * r).exp();
        let v: Vec<f64> = grid.nodes().iter().zip(s.profile.values()).map(|(r, x)| x * bump(*r)).collect();
        let mut state = StatePair::new(
            Profile::new(grid.clone(), v.clone()).unwrap(),
            Profile::new(grid, v).unwrap(),
        )
        .unwrap();
        state.normalize_masses(1.0, 1.0).unwrap();
        let out = newton_refine(&state, &params, (s.lambda, s.lambda), &NewtonOptions::default()).unwrap();
        let r = residuals(&out.state, &params);
        assert!(r.grad < 1e-8, "{r:?}");
        let (m1, m2) = out.state.masses();
        assert!((m1 - 1.0).abs() < 1e-10 && (m2 - 1.0).abs() < 1e-10);
    }
}
