//! Radial finite-volume discretization of `H^1(R^N)`.
//!
//! Nodes are `r_j = j h` on `[0, r_max]`. Each node owns the spherical shell
//! `[r_{j-1/2}, r_{j+1/2}]` (clipped to `[0, r_max]`); its weight is the exact
//! shell volume, so quadrature of the constant is exact. The Dirichlet form is
//! `sum_j omega_N r_{j+1/2}^{N-1} (u_{j+1}-u_j)^2 / h`, and the Laplacian is the
//! weighted adjoint of that form. Both are second-order accurate and exact on
//! quadratics.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Pchip;

/// Area of the unit sphere in `R^N`, with `omega_1 = 2` for the line.
pub fn sphere_area(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        n => 2.0 * PI * sphere_area(n - 2) / (n as f64 - 2.0),
    }
}

/// Volume of the ball of radius `r` in `R^N`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    sphere_area(dim) * r.powi(dim as i32) / dim as f64
}

/// Uniform radial grid. Immutable; shared through `Arc`.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    dim: usize,
    r_max: f64,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    flux: Vec<f64>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.nodes.len() == other.nodes.len()
            && self.r_max.to_bits() == other.r_max.to_bits()
    }
}

pub const MIN_POINTS: usize = 64;

impl RadialGrid {
    pub fn new(dim: usize, r_max: f64, n_points: usize) -> Result<Arc<Self>> {
        if dim == 0 {
            return Err(Error::param("N", "dimension must be positive"));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::param("r_max", format!("{r_max} must be positive")));
        }
        if n_points < MIN_POINTS {
            return Err(Error::param(
                "n_points",
                format!("{n_points} below the minimum {MIN_POINTS}"),
            ));
        }
        let h = r_max / (n_points - 1) as f64;
        let omega = sphere_area(dim);
        let nf = dim as f64;
        let nodes: Vec<f64> = (0..n_points).map(|j| j as f64 * h).collect();
        let shell = |a: f64, b: f64| omega / nf * (b.powi(dim as i32) - a.powi(dim as i32));
        let weights: Vec<f64> = (0..n_points)
            .map(|j| {
                let lo = if j == 0 { 0.0 } else { (j as f64 - 0.5) * h };
                let hi = if j + 1 == n_points {
                    r_max
                } else {
                    (j as f64 + 0.5) * h
                };
                shell(lo, hi)
            })
            .collect();
        let flux: Vec<f64> = (0..n_points - 1)
            .map(|j| omega * ((j as f64 + 0.5) * h).powi(dim as i32 - 1) / h)
            .collect();
        Ok(Arc::new(Self {
            dim,
            r_max,
            h,
            nodes,
            weights,
            flux,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn spacing(&self) -> f64 {
        self.h
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// Dirichlet-form coefficients `omega_N r_{j+1/2}^{N-1} / h`.
    pub fn flux(&self) -> &[f64] {
        &self.flux
    }

    /// Same node count on `[0, s r_max]`.
    pub fn scaled(&self, s: f64) -> Result<Arc<Self>> {
        Self::new(self.dim, self.r_max * s, self.len())
    }

    /// Weighted integral `sum_j w_j f_j`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Dirichlet form `<K u, v>` (the discrete `int grad u . grad v`).
    pub fn dirichlet_form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.flux
            .iter()
            .enumerate()
            .map(|(j, f)| f * (u[j + 1] - u[j]) * (v[j + 1] - v[j]))
            .sum()
    }

    /// Stiffness action `K u` (so that `-Laplacian u = W^{-1} K u`).
    pub fn stiffness_apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.len();
        for o in out.iter_mut() {
            *o = 0.0;
        }
        for j in 0..n - 1 {
            let q = self.flux[j] * (u[j + 1] - u[j]);
            out[j] -= q;
            out[j + 1] += q;
        }
    }
}

/// Nodal values of a radial function on a grid, homogeneous Dirichlet at
/// `r_max`.
#[derive(Debug, Clone)]
pub struct Profile {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl Profile {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Samples `f` at the nodes; the last node is set to zero.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let mut values: Vec<f64> = grid.nodes().iter().map(|&r| f(r)).collect();
        *values.last_mut().unwrap() = 0.0;
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `||u||_2^2`.
    pub fn mass(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v * v)
            .sum()
    }

    /// `||grad u||_2^2`.
    pub fn grad_norm_sq(&self) -> f64 {
        self.grid.dirichlet_form(&self.values, &self.values)
    }

    /// `||u||_p^p`.
    pub fn lp_integral(&self, p: f64) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.abs().powf(p))
            .sum()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.lp_integral(p).powf(1.0 / p)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// Discrete radial Laplacian `u'' + (N-1) u'/r`.
    pub fn laplacian(&self) -> Profile {
        let mut out = vec![0.0; self.values.len()];
        self.grid.stiffness_apply(&self.values, &mut out);
        for (o, w) in out.iter_mut().zip(self.grid.weights()) {
            *o = -*o / w;
        }
        Profile::from_raw(self.grid.clone(), out)
    }

    /// Monotone cubic interpolant of the profile (zero slope at the origin,
    /// zero beyond `r_max`).
    pub fn interpolant(&self) -> Pchip {
        Pchip::new(self.grid.nodes().to_vec(), self.values.clone(), true)
    }

    /// Resamples onto another grid of the same dimension.
    pub fn resample(&self, grid: &Arc<RadialGrid>) -> Result<Profile> {
        if grid.dim() != self.grid.dim() {
            return Err(Error::GridMismatch(format!(
                "dimension {} vs {}",
                grid.dim(),
                self.grid.dim()
            )));
        }
        if **grid == *self.grid {
            return Ok(Profile::from_raw(grid.clone(), self.values.clone()));
        }
        let mut v = self.interpolant().eval_sorted(grid.nodes());
        *v.last_mut().unwrap() = 0.0;
        Ok(Profile::from_raw(grid.clone(), v))
    }

    /// The dilation `t^{N/2} u(t r)` represented exactly on the grid scaled
    /// by `1/t` (no interpolation).
    pub fn dilate_exact(&self, t: f64) -> Result<Profile> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::param("t", format!("dilation factor {t} must be positive")));
        }
        let grid = self.grid.scaled(1.0 / t)?;
        let c = t.powf(self.grid.dim() as f64 / 2.0);
        Ok(Profile::from_raw(
            grid,
            self.values.iter().map(|v| c * v).collect(),
        ))
    }

    /// Index of the last node carrying at least `tol * sup` of the profile.
    pub fn support_radius(&self, tol: f64) -> f64 {
        let cut = tol * self.sup_norm();
        let k = self
            .values
            .iter()
            .rposition(|v| v.abs() > cut)
            .unwrap_or(0);
        self.grid.nodes()[k]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(
            w,
            "# N={} r_max={:.16e} n={}",
            self.grid.dim(),
            self.grid.r_max(),
            self.grid.len()
        )?;
        writeln!(w, "r,value")?;
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(w, "{r:.16e},{v:.16e}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Profile> {
        let reader = BufReader::new(File::open(path)?);
        let mut header: Option<ProfileHeader> = None;
        let mut values = Vec::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = k + 1;
            let bad = |m: &str| Error::Config {
                line: Some(lineno),
                message: m.to_string(),
            };
            if let Some(rest) = line.strip_prefix('#') {
                let mut hd = ProfileHeader {
                    dim: 0,
                    r_max: 0.0,
                    n: 0,
                };
                for tok in rest.split_whitespace() {
                    let (key, val) = tok.split_once('=').ok_or_else(|| bad("bad header token"))?;
                    match key {
                        "N" => hd.dim = val.parse().map_err(|_| bad("bad N"))?,
                        "r_max" => hd.r_max = val.parse().map_err(|_| bad("bad r_max"))?,
                        "n" => hd.n = val.parse().map_err(|_| bad("bad n"))?,
                        _ => return Err(bad("unknown header key")),
                    }
                }
                header = Some(hd);
                continue;
            }
            if line.trim().is_empty() || line.starts_with("r,") {
                continue;
            }
            let (_, v) = line.split_once(',').ok_or_else(|| bad("expected `r,value`"))?;
            values.push(v.trim().parse::<f64>().map_err(|_| bad("bad value"))?);
        }
        let hd = header.ok_or_else(|| Error::Config {
            line: Some(1),
            message: "missing `# N=.. r_max=.. n=..` header".into(),
        })?;
        let grid = RadialGrid::new(hd.dim, hd.r_max, hd.n)?;
        Profile::new(grid, values)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let header = serde_json::to_vec(&ProfileHeader {
            dim: self.grid.dim(),
            r_max: self.grid.r_max(),
            n: self.grid.len(),
        })?;
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Profile> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Config {
                line: None,
                message: format!("{}: not a profile file", path.display()),
            });
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut header)?;
        let hd: ProfileHeader = serde_json::from_slice(&header)?;
        let mut values = Vec::with_capacity(hd.n);
        let mut buf = [0u8; 8];
        for _ in 0..hd.n {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        let grid = RadialGrid::new(hd.dim, hd.r_max, hd.n)?;
        Profile::new(grid, values)
    }
}

pub const BINARY_MAGIC: &[u8; 8] = b"NSPROF1\n";

#[derive(Debug, Serialize, Deserialize)]
struct ProfileHeader {
    #[serde(rename = "N")]
    dim: usize,
    r_max: f64,
    n: usize,
}

fn same_grid(u: &Profile, v: &Profile) -> Result<()> {
    if Arc::ptr_eq(&u.grid, &v.grid) || *u.grid == *v.grid {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "grids (N={}, r_max={}, n={}) and (N={}, r_max={}, n={})",
            u.grid.dim(),
            u.grid.r_max(),
            u.grid.len(),
            v.grid.dim(),
            v.grid.r_max(),
            v.grid.len()
        )))
    }
}

/// `int |u|^{r1} |v|^{r2}`.
pub fn mixed_term(u: &Profile, v: &Profile, r1: f64, r2: f64) -> Result<f64> {
    same_grid(u, v)?;
    Ok(u.grid
        .weights()
        .iter()
        .zip(u.values.iter().zip(&v.values))
        .map(|(w, (a, b))| {
            if *a == 0.0 || *b == 0.0 {
                0.0
            } else {
                w * a.abs().powf(r1) * b.abs().powf(r2)
            }
        })
        .sum())
}

/// Weighted `L^2` inner product.
pub fn inner(u: &Profile, v: &Profile) -> Result<f64> {
    same_grid(u, v)?;
    Ok(u.grid
        .weights()
        .iter()
        .zip(u.values.iter().zip(&v.values))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}

/// Dirichlet inner product `int grad u . grad v`.
pub fn grad_inner(u: &Profile, v: &Profile) -> Result<f64> {
    same_grid(u, v)?;
    Ok(u.grid.dirichlet_form(&u.values, &v.values))
}

/// `t^{N/2} u(t r)` resampled onto the same grid by monotone cubic
/// interpolation.
pub fn dilate_profile(u: &Profile, t: f64) -> Result<Profile> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::param("t", format!("dilation factor {t} must be positive")));
    }
    if t == 1.0 {
        return Ok(u.clone());
    }
    let grid = u.grid();
    let support = u.support_radius(1e-12);
    if support / t > grid.r_max() {
        log::warn!(
            "dilation by t = {t} pushes support {support:.3} past r_max = {:.3}",
            grid.r_max()
        );
    }
    let c = t.powf(grid.dim() as f64 / 2.0);
    let pts: Vec<f64> = grid.nodes().iter().map(|r| t * r).collect();
    let mut v = u.interpolant().eval_sorted(&pts);
    for x in &mut v {
        *x *= c;
    }
    *v.last_mut().unwrap() = 0.0;
    Ok(Profile::from_raw(grid.clone(), v))
}

/// Discrete radial Laplacian.
pub fn apply_laplacian(u: &Profile) -> Profile {
    u.laplacian()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gauss(grid: &Arc<RadialGrid>) -> Profile {
        Profile::from_fn(grid.clone(), |r| (-r * r / 2.0).exp())
    }

    #[test]
    fn sphere_areas() {
        assert_eq!(sphere_area(1), 2.0);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn ball_volume_is_exact() {
        for dim in 1..=6 {
            let g = RadialGrid::new(dim, 7.3, 501).unwrap();
            let vol: f64 = g.weights().iter().sum();
            let exact = ball_volume(dim, 7.3);
            assert!(((vol - exact) / exact).abs() < 1e-12, "N={dim}");
            assert!(g.weights().iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn gaussian_mass_n3() {
        let g = RadialGrid::new(3, 10.0, 8193).unwrap();
        let m = gauss(&g).mass();
        let exact = PI.powf(1.5);
        assert!(((m - exact) / exact).abs() < 1e-6, "{m}");
        assert!((gauss(&g).scaled(2.0).mass() - 4.0 * m).abs() < 1e-12 * m);
    }

    #[test]
    fn gaussian_gradient_n3_and_order() {
        let exact = 1.5 * PI.powf(1.5);
        let err = |n| {
            let g = RadialGrid::new(3, 12.0, n).unwrap();
            ((gauss(&g).grad_norm_sq() - exact) / exact).abs()
        };
        assert!(err(2048) < 1e-4);
        let order = (err(512) / err(1024)).log2();
        assert!((1.9..=2.1).contains(&order), "order {order}");
    }

    #[test]
    fn laplacian_exact_on_quadratic() {
        let g = RadialGrid::new(3, 5.0, 256).unwrap();
        let u = Profile::from_fn(g.clone(), |r| r * r - 25.0);
        let lu = u.laplacian();
        for v in &lu.values()[..g.len() - 1] {
            assert!((v - 6.0).abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn laplacian_adjoint() {
        let g = RadialGrid::new(2, 8.0, 300).unwrap();
        let u = Profile::from_fn(g.clone(), |r| (-r).exp() * (1.0 + r.sin()));
        let v = Profile::from_fn(g.clone(), |r| 1.0 / (1.0 + r * r));
        let a = inner(&u.laplacian(), &v).unwrap();
        let b = inner(&v.laplacian(), &u).unwrap();
        assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        let e = -inner(&u.laplacian(), &u).unwrap();
        assert!((e - u.grad_norm_sq()).abs() < 1e-10 * e);
    }

    #[test]
    fn mixed_term_1d() {
        let g = RadialGrid::new(1, 12.0, 16385).unwrap();
        let u = gauss(&g);
        let m = mixed_term(&u, &u, 2.0, 2.0).unwrap();
        assert!((m - (PI / 2.0).sqrt()).abs() < 1e-6);
        assert_eq!(mixed_term(&u, &Profile::zeros(g), 2.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn dilation_scalings() {
        let g = RadialGrid::new(3, 16.0, 16385).unwrap();
        let u = gauss(&g);
        assert_eq!(dilate_profile(&u, 1.0).unwrap().values(), u.values());
        for t in [0.7, 1.3, 2.0] {
            let ut = dilate_profile(&u, t).unwrap();
            assert!(((ut.mass() - u.mass()) / u.mass()).abs() < 1e-6);
            let g2 = t * t * u.grad_norm_sq();
            assert!(((ut.grad_norm_sq() - g2) / g2).abs() < 1e-4);
            let p = 3.0;
            let lp = t.powf((p / 2.0 - 1.0) * 3.0) * u.lp_integral(p);
            assert!(((ut.lp_integral(p) - lp) / lp).abs() < 1e-4);
        }
        let ex = u.dilate_exact(2.0).unwrap();
        assert!(((ex.grad_norm_sq() - 4.0 * u.grad_norm_sq()) / u.grad_norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn io_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = RadialGrid::new(2, 9.0, 100).unwrap();
        let u = Profile::from_fn(g, |r| (-r).exp() / 3.0);
        let pb = dir.path().join("u.bin");
        u.write_binary(&pb).unwrap();
        let back = Profile::read_binary(&pb).unwrap();
        assert_eq!(back.values(), u.values());
        let pc = dir.path().join("u.csv");
        u.write_csv(&pc).unwrap();
        let back = Profile::read_csv(&pc).unwrap();
        assert_eq!(back.values(), u.values());
        assert_eq!(**back.grid(), **u.grid());
    }

    #[test]
    fn grid_mismatch_detected() {
        let a = RadialGrid::new(1, 5.0, 100).unwrap();
        let b = RadialGrid::new(1, 6.0, 100).unwrap();
        let u = Profile::zeros(a);
        let v = Profile::zeros(b);
        assert!(matches!(inner(&u, &v), Err(Error::GridMismatch(_))));
    }
}
