//! Small direct solvers: tridiagonal (real and complex) and banded LU with
//! partial pivoting.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Solves the tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`
/// (`lower[0]` and `upper[n-1]` are ignored). No pivoting; intended for
/// diagonally dominant or accretive matrices.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Singular("tridiagonal pivot 0".into()));
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::Singular(format!("tridiagonal pivot {i}")));
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Pre-factored complex tridiagonal operator, reused across time steps.
#[derive(Debug, Clone)]
pub struct ComplexTridiag {
    lower: Vec<Complex64>,
    c: Vec<Complex64>,
    inv_beta: Vec<Complex64>,
}

impl ComplexTridiag {
    pub fn factor(lower: &[Complex64], diag: &[Complex64], upper: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        let mut inv_beta = vec![Complex64::new(0.0, 0.0); n];
        let mut beta = diag[0];
        for i in 0..n {
            if i > 0 {
                c[i - 1] = upper[i - 1] / beta;
                beta = diag[i] - lower[i] * c[i - 1];
            }
            if beta.norm() == 0.0 || !beta.is_finite() {
                return Err(Error::Singular(format!("complex tridiagonal pivot {i}")));
            }
            inv_beta[i] = beta.inv();
        }
        Ok(Self {
            lower: lower.to_vec(),
            c,
            inv_beta,
        })
    }

    pub fn solve(&self, rhs: &mut [Complex64]) {
        let n = rhs.len();
        rhs[0] *= self.inv_beta[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv_beta[i];
        }
        for i in (0..n - 1).rev() {
            let next = rhs[i + 1];
            rhs[i] -= self.c[i] * next;
        }
    }
}

/// Banded matrix with `kl` sub- and `ku` super-diagonals, stored row-wise
/// with room for the pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` at `(i, j)`; `j` must lie inside the declared band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// In-place LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.ku + self.kl;
        let mut piv = vec![0usize; n];
        let (mut umax, mut umin) = (0.0f64, f64::INFINITY);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(format!("banded LU: zero pivot in column {k}")));
            }
            piv[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            umax = umax.max(pivot.abs());
            umin = umin.min(pivot.abs());
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let kj = self.idx(k, j);
                        let ij = self.idx(i, j);
                        self.data[ij] -= l * self.data[kj];
                    }
                }
            }
        }
        Ok(BandedLu {
            m: self,
            piv,
            pivot_ratio: umax / umin,
        })
    }
}

/// Factored banded matrix.
#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
    piv: Vec<usize>,
    pivot_ratio: f64,
}

impl BandedLu {
    /// `max |u_kk| / min |u_kk|`, a cheap lower bound on the condition number.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + m.kl).min(n - 1) {
                    b[i] -= m.data[m.idx(i, k)] * bk;
                }
            }
        }
        let reach = m.ku + m.kl;
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                s -= m.data[m.idx(i, j)] * b[j];
            }
            b[i] = s / m.data[m.idx(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tridiagonal_solves() {
        let n = 50;
        let lower = vec![-1.0; n];
        let diag = vec![4.0; n];
        let upper = vec![-1.0; n];
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = 4.0 * x[i];
                if i > 0 {
                    s -= x[i - 1];
                }
                if i + 1 < n {
                    s -= x[i + 1];
                }
                s
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut b).unwrap();
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-13);
        }
    }

    #[test]
    fn complex_tridiagonal_solves() {
        let n = 40;
        let i1 = Complex64::new(0.0, 1.0);
        let lower = vec![-i1; n];
        let diag = vec![Complex64::new(1.0, 2.0); n];
        let upper = vec![-i1; n];
        let x: Vec<Complex64> = (0..n).map(|k| Complex64::new(k as f64, 1.0)).collect();
        let mut b: Vec<Complex64> = (0..n)
            .map(|k| {
                let mut s = diag[k] * x[k];
                if k > 0 {
                    s += lower[k] * x[k - 1];
                }
                if k + 1 < n {
                    s += upper[k] * x[k + 1];
                }
                s
            })
            .collect();
        ComplexTridiag::factor(&lower, &diag, &upper).unwrap().solve(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).norm() < 1e-12);
        }
    }

    #[test]
    fn banded_lu_needs_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 60;
        let (kl, ku) = (2, 2);
        let mut a = BandedMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // tiny diagonal forces row swaps
                let v = if i == j { 1e-9 } else { rng.gen_range(-1.0..1.0) };
                a.add(i, j, v);
            }
        }
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut b = a.matvec(&x);
        let lu = a.clone().factor().unwrap();
        lu.solve(&mut b);
        let err = b.iter().zip(&x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn singular_reported() {
        let a = BandedMatrix::zeros(70, 1, 1);
        assert!(matches!(a.factor(), Err(Error::Singular(_))));
    }
}
