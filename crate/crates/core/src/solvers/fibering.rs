//! The fibering map `theta(t) = J(u1^t, u2^t)` along mass-preserving
//! dilations and its stationary points.

use serde::{Deserialize, Serialize};

use crate::energy::{Integrals, StatePair};
use crate::model::Params;

/// `theta(t) = a t^2/2 - b1 t^{e1} - b2 t^{e2} - c t^{e3}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberingCoeffs {
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

impl FiberingCoeffs {
    pub fn from_integrals(ints: &Integrals, params: &Params) -> Self {
        let (e1, e2, e3) = params.dilation_exponents();
        Self {
            a: ints.grad1 + ints.grad2,
            b1: params.mu1 / params.p1 * ints.lp1,
            b2: params.mu2 / params.p2 * ints.lp2,
            c: params.beta * ints.cross,
            e1,
            e2,
            e3,
        }
    }

    pub fn theta(&self, t: f64) -> f64 {
        0.5 * self.a * t * t
            - self.b1 * t.powf(self.e1)
            - self.b2 * t.powf(self.e2)
            - self.c * t.powf(self.e3)
    }

    pub fn theta_prime(&self, t: f64) -> f64 {
        t * self.reduced_derivative(t)
    }

    /// `theta'(t) / t`, which has the same sign as `theta'`.
    pub fn reduced_derivative(&self, t: f64) -> f64 {
        self.a
            - self.e1 * self.b1 * t.powf(self.e1 - 2.0)
            - self.e2 * self.b2 * t.powf(self.e2 - 2.0)
            - self.e3 * self.c * t.powf(self.e3 - 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StationaryKind {
    Min,
    Max,
    /// Touching zero without a sign change (degenerate).
    Inflection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub t: f64,
    pub kind: StationaryKind,
    pub theta: f64,
}

/// Sampled fibering map of a state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DilationCurve {
    pub coeffs: FiberingCoeffs,
    pub samples: Vec<(f64, f64)>,
    pub stationary_points: Vec<StationaryPoint>,
}

impl DilationCurve {
    /// Smallest local minimum.
    pub fn first_min(&self) -> Option<StationaryPoint> {
        self.stationary_points
            .iter()
            .copied()
            .find(|s| s.kind == StationaryKind::Min)
    }

    /// Local maximum with the largest value.
    pub fn highest_max(&self) -> Option<StationaryPoint> {
        self.stationary_points
            .iter()
            .copied()
            .filter(|s| s.kind == StationaryKind::Max)
            .max_by(|a, b| a.theta.total_cmp(&b.theta))
    }
}

pub const T_MIN: f64 = 1e-3;
pub const T_MAX: f64 = 1e3;

/// Builds the fibering curve of a state: coefficients from the five
/// integrals, `samples` points on a log grid over `[1e-3, 1e3]`, and the
/// stationary points located by sign changes of `theta'` plus bisection.
pub fn fibering_curve(state: &StatePair, params: &Params) -> DilationCurve {
    let coeffs = FiberingCoeffs::from_integrals(&Integrals::of(state, params), params);
    curve_from_coeffs(coeffs, 601)
}

pub fn curve_from_coeffs(coeffs: FiberingCoeffs, samples: usize) -> DilationCurve {
    let samples_v = log_grid(T_MIN, T_MAX, samples)
        .into_iter()
        .map(|t| (t, coeffs.theta(t)))
        .collect();
    DilationCurve {
        coeffs,
        samples: samples_v,
        stationary_points: stationary_points(&coeffs, T_MIN, T_MAX, 4001),
    }
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Stationary points of `theta` in `[lo, hi]` from sign changes of `theta'` on a
/// log grid with `n` nodes, each refined by bisection in `ln t` to relative
/// width `1e-10`.
pub fn stationary_points(c: &FiberingCoeffs, lo: f64, hi: f64, n: usize) -> Vec<StationaryPoint> {
    let ts = log_grid(lo, hi, n);
    let mut out = Vec::new();
    let mut prev = c.reduced_derivative(ts[0]);
    for k in 1..n {
        let cur = c.reduced_derivative(ts[k]);
        if prev != 0.0 && cur != 0.0 && (prev > 0.0) != (cur > 0.0) {
            let t = bisect_log(|t| c.reduced_derivative(t), ts[k - 1], ts[k]);
            out.push(StationaryPoint {
                t,
                kind: if prev < 0.0 { StationaryKind::Min } else { StationaryKind::Max },
                theta: c.theta(t),
            });
        } else if cur == 0.0 {
            out.push(StationaryPoint {
                t: ts[k],
                kind: StationaryKind::Inflection,
                theta: c.theta(ts[k]),
            });
        }
        if cur != 0.0 {
            prev = cur;
        }
    }
    out
}

fn bisect_log(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let fa_pos = f(lo) > 0.0;
    while b - a > 1e-10 {
        let m = 0.5 * (a + b);
        if (f(m.exp()) > 0.0) == fa_pos {
            a = m;
        } else {
            b = m;
        }
    }
    (0.5 * (a + b)).exp()
}

/// Interval containing every zero of `theta'` when `e1, e2 < 2 < e3`: at a
/// zero each power term of `theta'/t` is at most `a`, which bounds `t` from
/// below through the subcritical terms and from above through the coupling.
/// `None` if the bounds cross (no stationary point) or the exponents are not
/// of that shape.
pub fn stationary_bracket(c: &FiberingCoeffs) -> Option<(f64, f64)> {
    if !(c.e1 < 2.0 && c.e2 < 2.0 && c.e3 > 2.0 && c.a > 0.0 && c.c > 0.0) {
        return None;
    }
    let lower = |e: f64, b: f64| if b > 0.0 { (e * b / c.a).powf(1.0 / (2.0 - e)) } else { 0.0 };
    let lo = lower(c.e1, c.b1).max(lower(c.e2, c.b2));
    let hi = (c.a / (c.e3 * c.c)).powf(1.0 / (c.e3 - 2.0));
    if lo >= hi || lo <= 0.0 {
        return None;
    }
    Some((lo, hi))
}

/// Counts the sign changes of `theta'` on `n` log-spaced points over
/// `[lo, hi]`. Powers are advanced by multiplicative recurrence, resynced
/// every 1024 steps, so a million-point scan costs a few multiplications per
/// point.
pub fn count_sign_changes_dense(c: &FiberingCoeffs, lo: f64, hi: f64, n: usize) -> usize {
    let q = (hi / lo).powf(1.0 / (n - 1) as f64);
    let ex = [c.e1 - 2.0, c.e2 - 2.0, c.e3 - 2.0];
    let co = [c.e1 * c.b1, c.e2 * c.b2, c.e3 * c.c];
    let step = [q.powf(ex[0]), q.powf(ex[1]), q.powf(ex[2])];
    let mut pw = [0.0; 3];
    let mut count = 0;
    let mut prev_sign = 0i8;
    for k in 0..n {
        if k % 1024 == 0 {
            let t = (lo.ln() + k as f64 * q.ln()).exp();
            for i in 0..3 {
                pw[i] = t.powf(ex[i]);
            }
        }
        let v = c.a - co[0] * pw[0] - co[1] * pw[1] - co[2] * pw[2];
        let s = if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        };
        if s != 0 {
            if prev_sign != 0 && s != prev_sign {
                count += 1;
            }
            prev_sign = s;
        }
        for i in 0..3 {
            pw[i] *= step[i];
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs() -> FiberingCoeffs {
        // H0-like exponents: e1, e2 < 2 < e3
        FiberingCoeffs {
            a: 2.0,
            b1: 0.5,
            b2: 0.3,
            c: 0.2,
            e1: 0.75,
            e2: 1.2,
            e3: 3.0,
        }
    }

    #[test]
    fn min_then_max() {
        let curve = curve_from_coeffs(coeffs(), 101);
        let kinds: Vec<_> = curve.stationary_points.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, vec![StationaryKind::Min, StationaryKind::Max]);
        for s in &curve.stationary_points {
            assert!(coeffs().theta_prime(s.t).abs() < 1e-8);
        }
        assert!(curve.first_min().unwrap().theta < 0.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let c = coeffs();
        for t in [0.01, 0.5, 1.0, 3.0] {
            let h = 1e-6 * t;
            let fd = (c.theta(t + h) - c.theta(t - h)) / (2.0 * h);
            assert!((fd - c.theta_prime(t)).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn scalar_reduction() {
        // c = 0, single power: theta(e^s) is the scalar dilation energy
        let c = FiberingCoeffs { b2: 0.0, c: 0.0, e1: 3.0, ..coeffs() };
        let (grad, lp, mu, p, dim) = (2.0, 0.5 * 4.0, 1.0, 4.0, 3usize);
        for s in [-1.0, 0.0, 0.7] {
            let (v, _) = crate::scalar::dilation_energy_from(grad, lp, dim, mu, p, s);
            assert!((c.theta(f64::exp(s)) - v).abs() < 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn bracket_contains_stationary_points() {
        let c = coeffs();
        let (lo, hi) = stationary_bracket(&c).unwrap();
        for s in stationary_points(&c, T_MIN, T_MAX, 4001) {
            assert!(s.t > lo && s.t < hi);
        }
        assert!(c.reduced_derivative(lo) < 0.0 && c.reduced_derivative(hi) < 0.0);
        assert_eq!(count_sign_changes_dense(&c, lo, hi, 10_000), 2);
    }

    #[test]
    fn dense_count_agrees() {
        let c = coeffs();
        assert_eq!(count_sign_changes_dense(&c, T_MIN, T_MAX, 1_000_000), 2);
        assert_eq!(stationary_points(&c, T_MIN, T_MAX, 4001).len(), 2);
    }
}
