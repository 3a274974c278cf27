//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson).
//!
//! Shape preserving: data that is nonnegative / monotone on an interval stays
//! so after interpolation, which keeps positive profiles positive.

/// PCHIP interpolant on strictly increasing abscissae.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
    /// Value returned right of the last abscissa.
    pub right_fill: f64,
}

impl Pchip {
    /// Builds the interpolant. `even_left` forces a zero slope at the first
    /// node (radial profiles are even in `r`).
    pub fn new(x: Vec<f64>, y: Vec<f64>, even_left: bool) -> Self {
        assert_eq!(x.len(), y.len(), "pchip: length mismatch");
        assert!(x.len() >= 2, "pchip: need at least two nodes");
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        for k in 1..n - 1 {
            let (a, b) = (del[k - 1], del[k]);
            if a * b <= 0.0 {
                d[k] = 0.0;
            } else {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / a + w2 / b);
            }
        }
        d[0] = if even_left { 0.0 } else { edge_slope(h[0], h.get(1).copied(), del[0], del.get(1).copied()) };
        d[n - 1] = edge_slope(
            h[n - 2],
            (n >= 3).then(|| h[n - 3]),
            del[n - 2],
            (n >= 3).then(|| del[n - 3]),
        );
        Self {
            x,
            y,
            d,
            right_fill: 0.0,
        }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Evaluates at `t`; left of the first node the first value is returned
    /// (radial data is never queried there), right of the last `right_fill`.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t > self.x[n - 1] {
            return self.right_fill;
        }
        let k = self.x.partition_point(|&xi| xi <= t).clamp(1, n - 1) - 1;
        self.eval_in(k, t)
    }

    /// Evaluates at nondecreasing query points with a moving cursor.
    pub fn eval_sorted(&self, ts: &[f64]) -> Vec<f64> {
        let n = self.x.len();
        let mut k = 0usize;
        ts.iter()
            .map(|&t| {
                if t <= self.x[0] {
                    return self.y[0];
                }
                if t > self.x[n - 1] {
                    return self.right_fill;
                }
                while k + 2 < n && self.x[k + 1] < t {
                    k += 1;
                }
                self.eval_in(k, t)
            })
            .collect()
    }

    fn eval_in(&self, k: usize, t: f64) -> f64 {
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

/// Shape-preserving three-point end slope.
fn edge_slope(h0: f64, h1: Option<f64>, del0: f64, del1: Option<f64>) -> f64 {
    let (Some(h1), Some(del1)) = (h1, del1) else {
        return del0;
    };
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d * del0 <= 0.0 {
        0.0
    } else if del0 * del1 <= 0.0 && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_cubics_are_close() {
        let x: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|&t| (-t * t).exp()).collect();
        let p = Pchip::new(x.clone(), y.clone(), true);
        for (xi, yi) in x.iter().zip(&y) {
            assert!((p.eval(*xi) - yi).abs() < 1e-15);
        }
        let e = (p.eval(1.05) - (-1.05f64 * 1.05).exp()).abs();
        assert!(e < 1e-4, "{e}");
    }

    #[test]
    fn preserves_monotonicity_and_sign() {
        let x: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y = vec![5.0, 5.0, 4.0, 0.5, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0];
        let p = Pchip::new(x, y, true);
        let mut prev = f64::INFINITY;
        for k in 0..=900 {
            let v = p.eval(k as f64 * 0.01);
            assert!(v >= 0.0 && v <= prev + 1e-15);
            prev = v;
        }
        assert_eq!(p.eval(9.5), 0.0);
        assert_eq!(p.eval(100.0), 0.0);
    }

    #[test]
    fn sorted_matches_pointwise() {
        let x: Vec<f64> = (0..30).map(|k| (k as f64).powf(1.3)).collect();
        let y: Vec<f64> = x.iter().map(|t| 1.0 / (1.0 + t)).collect();
        let p = Pchip::new(x, y, false);
        let ts: Vec<f64> = (0..200).map(|k| k as f64 * 0.42).collect();
        let batch = p.eval_sorted(&ts);
        for (t, v) in ts.iter().zip(batch) {
            assert_eq!(p.eval(*t), v);
        }
    }
}
