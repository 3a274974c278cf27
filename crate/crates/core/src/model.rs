//! Problem data, hypothesis regimes and the explicit geometry thresholds
//! (`rho0`, `beta0`) that separate the local-minimum well from the rest of
//! the constraint set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hypothesis regime of a parameter set.
///
/// `H0`: both self-interactions mass-subcritical, coupling mass-supercritical.
/// `H1`: both self-interactions mass-supercritical, coupling mass-subcritical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    H0,
    H1,
    Other,
}

/// Sobolev critical exponent `2N/(N-2)`, infinite for `N <= 2`.
pub fn critical_exponent(dim: usize) -> f64 {
    if dim <= 2 {
        f64::INFINITY
    } else {
        2.0 * dim as f64 / (dim as f64 - 2.0)
    }
}

/// Mass-critical exponent `2 + 4/N`.
pub fn mass_critical_exponent(dim: usize) -> f64 {
    2.0 + 4.0 / dim as f64
}

/// Problem data of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(rename = "N")]
    pub dim: usize,
    pub p1: f64,
    pub p2: f64,
    pub r1: f64,
    pub r2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub beta: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Params {
    /// Validates the field-level bounds shared by every regime.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("N", "dimension must be positive"));
        }
        let crit = critical_exponent(self.dim);
        for (field, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(p.is_finite() && p > 2.0 && p < crit) {
                return Err(Error::param(field, format!("{p} not in (2, {crit})")));
            }
        }
        for (field, r) in [("r1", self.r1), ("r2", self.r2)] {
            if !(r.is_finite() && r > 1.0) {
                return Err(Error::param(field, format!("{r} must exceed 1")));
            }
        }
        if self.r1 + self.r2 >= crit {
            return Err(Error::param(
                "r1",
                format!("r1 + r2 = {} must be below {crit}", self.r1 + self.r2),
            ));
        }
        for (field, v) in [("mu1", self.mu1), ("mu2", self.mu2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(field, "must be positive"));
            }
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::param("beta", "must be nonnegative"));
        }
        for (field, v) in [("a1", self.a1), ("a2", self.a2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(field, "mass must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn coupling_exponent(&self) -> f64 {
        self.r1 + self.r2
    }

    /// Dilation exponents `(p1/2-1)N`, `(p2/2-1)N`, `((r1+r2)/2-1)N`.
    pub fn dilation_exponents(&self) -> (f64, f64, f64) {
        let n = self.dim as f64;
        (
            (self.p1 / 2.0 - 1.0) * n,
            (self.p2 / 2.0 - 1.0) * n,
            (self.coupling_exponent() / 2.0 - 1.0) * n,
        )
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_masses(mut self, a1: f64, a2: f64) -> Self {
        self.a1 = a1;
        self.a2 = a2;
        self
    }

    pub fn regime(&self) -> Result<Regime> {
        classify_regime(self)
    }
}

/// Classifies the exponents into `H0`, `H1` or `Other`.
pub fn classify_regime(params: &Params) -> Result<Regime> {
    params.validate()?;
    let crit = mass_critical_exponent(params.dim);
    let s = params.coupling_exponent();
    let sub = |p: f64| p < crit;
    let sup = |p: f64| p > crit;
    Ok(if sub(params.p1) && sub(params.p2) && sup(s) {
        Regime::H0
    } else if sup(params.p1) && sup(params.p2) && sub(s) {
        Regime::H1
    } else {
        Regime::Other
    })
}

/// Gagliardo-Nirenberg exponent `N(p-2)/(2p)`.
pub fn gn_exponent(dim: usize, p: f64) -> Result<f64> {
    if dim == 0 {
        return Err(Error::param("N", "dimension must be positive"));
    }
    let crit = critical_exponent(dim);
    if !(p >= 2.0 && p <= crit) || !p.is_finite() {
        return Err(Error::param("p", format!("{p} not in [2, {crit}]")));
    }
    Ok(dim as f64 * (p - 2.0) / (2.0 * p))
}

/// Where a set of Gagliardo-Nirenberg constants came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GnSource {
    /// Sharp constants from the computed scalar ground states.
    Sharp,
    /// A conservative closed-form upper bound.
    Analytic,
}

/// Gagliardo-Nirenberg constants for `p1`, `p2` and the coupling exponent
/// `r1 + r2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnConstants {
    pub c_p1: f64,
    pub c_p2: f64,
    pub c_cross: f64,
    pub source: GnSource,
}

impl GnConstants {
    /// Sharp constants obtained from the scalar ground states.
    pub fn sharp(params: &Params) -> Result<Self> {
        use crate::scalar::sharp_gn_constant;
        params.validate()?;
        Ok(Self {
            c_p1: sharp_gn_constant(params.dim, params.p1)?,
            c_p2: sharp_gn_constant(params.dim, params.p2)?,
            c_cross: sharp_gn_constant(params.dim, params.coupling_exponent())?,
            source: GnSource::Sharp,
        })
    }

    /// Closed-form upper bounds. Only available on the line, where
    /// `|u|_inf^2 <= |u|_2 |u'|_2` gives `|u|_p^p <= |u'|_2^{(p-2)/2} |u|_2^{(p+2)/2}`,
    /// i.e. `C(1, p) <= 1`.
    pub fn analytic(params: &Params) -> Result<Self> {
        params.validate()?;
        if params.dim != 1 {
            return Err(Error::GnUnavailable(format!(
                "no closed-form bound implemented for N = {}",
                params.dim
            )));
        }
        Ok(Self {
            c_p1: 1.0,
            c_p2: 1.0,
            c_cross: 1.0,
            source: GnSource::Analytic,
        })
    }

    /// Sharp constants, falling back to the analytic bound when the
    /// ground-state solve fails.
    pub fn sharp_or_analytic(params: &Params) -> Result<Self> {
        match Self::sharp(params) {
            Ok(gn) => Ok(gn),
            Err(err) => {
                log::warn!("sharp GN constants unavailable ({err}); using analytic bound");
                Self::analytic(params)
            }
        }
    }
}

/// Constants fixing the geometry of the local-minimum problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConstants {
    pub regime: Regime,
    pub rho0: f64,
    pub beta0: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    #[serde(rename = "K3")]
    pub k3: f64,
    pub gn_alpha_p1: f64,
    pub gn_alpha_p2: f64,
    pub gn_c_p1: f64,
    pub gn_c_p2: f64,
    pub gn_c_cross: f64,
    /// Hölder split used for the coupling term; always `(r1+r2)/r1`.
    pub holder_q: f64,
    pub gn_source: GnSource,
}

/// Left-hand sides of the two defining inequalities (both must be `<= 1/8`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub rho_condition: f64,
    pub beta_condition: f64,
}

impl GeometryConstants {
    /// Evaluates the two defining inequalities at the stored `(rho0, beta0)`.
    pub fn report(&self, params: &Params) -> ThresholdReport {
        let (e1, e2, e3) = kinetic_exponents(params);
        let rho = self.rho0;
        match self.regime {
            Regime::H1 => ThresholdReport {
                rho_condition: self.k1 * (2.0 * rho).powf(e1) + self.k2 * (2.0 * rho).powf(e2),
                beta_condition: self.beta0 * self.k3 * rho.powf(e3),
            },
            _ => ThresholdReport {
                rho_condition: self.k1 * rho.powf(e1) + self.k2 * rho.powf(e2),
                beta_condition: self.beta0 * self.k3 * (2.0 * rho).powf(e3),
            },
        }
    }

    /// Lower bound `rho/2 - K1 rho^.. - K2 rho^.. - beta K3 rho^..` for `J` on
    /// `S(a1, a2)` at kinetic level `rho`.
    pub fn energy_lower_bound(&self, params: &Params, rho: f64, beta: f64) -> f64 {
        let (e1, e2, e3) = kinetic_exponents(params);
        0.5 * rho
            - self.k1 * rho.powf(e1 + 1.0)
            - self.k2 * rho.powf(e2 + 1.0)
            - beta * self.k3 * rho.powf(e3 + 1.0)
    }

    /// Radius of the small ball used for mountain-pass starting points.
    pub fn rho_bar(&self, fraction: f64) -> f64 {
        fraction * self.rho0
    }
}

/// The exponents `N(p-2)/4 - 1` for `p1`, `p2` and `r1 + r2`.
fn kinetic_exponents(params: &Params) -> (f64, f64, f64) {
    let n = params.dim as f64;
    let e = |p: f64| n * (p - 2.0) / 4.0 - 1.0;
    (e(params.p1), e(params.p2), e(params.coupling_exponent()))
}

/// Computes `K1, K2, K3`, `rho0` and `beta0`.
///
/// Under `H0` `rho0` is the smallest radius with
/// `K1 rho^{e1} + K2 rho^{e2} <= 1/8` and `beta0` the largest coupling with
/// `beta K3 (2 rho0)^{e3} <= 1/8`. Under `H1` the roles of `rho0` and
/// `2 rho0` swap and `rho0` is the largest admissible radius.
pub fn compute_thresholds(params: &Params, gn: &GnConstants) -> Result<GeometryConstants> {
    let regime = classify_regime(params)?;
    if regime == Regime::Other {
        return Err(Error::Regime(
            "thresholds are only defined under H0 or H1".into(),
        ));
    }
    for (name, c) in [("c_p1", gn.c_p1), ("c_p2", gn.c_p2), ("c_cross", gn.c_cross)] {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::GnUnavailable(format!("{name} = {c}")));
        }
    }
    if params.a1 <= 0.0 || params.a2 <= 0.0 {
        return Err(Error::param("a1", "thresholds need positive masses"));
    }
    let dim = params.dim;
    let s = params.coupling_exponent();
    let alpha1 = gn_exponent(dim, params.p1)?;
    let alpha2 = gn_exponent(dim, params.p2)?;
    let alpha_s = gn_exponent(dim, s)?;
    let q = s / params.r1;

    let k1 = params.mu1 / params.p1
        * gn.c_p1.powf(params.p1)
        * params.a1.powf((1.0 - alpha1) * params.p1 / 2.0);
    let k2 = params.mu2 / params.p2
        * gn.c_p2.powf(params.p2)
        * params.a2.powf((1.0 - alpha2) * params.p2 / 2.0);
    let k3 = gn.c_cross.powf(s)
        * params.a1.powf((1.0 - alpha_s) * params.r1 / 2.0)
        * params.a2.powf((1.0 - alpha_s) * params.r2 / 2.0);

    let (e1, e2, e3) = kinetic_exponents(params);
    let (rho0, beta0) = match regime {
        Regime::H0 => {
            // decreasing in rho; keep the end of the bracket where the sum is <= 1/8
            let f = |rho: f64| k1 * rho.powf(e1) + k2 * rho.powf(e2) - 0.125;
            let rho0 = bisect_log(f, false)?;
            (rho0, 0.125 / (k3 * (2.0 * rho0).powf(e3)))
        }
        Regime::H1 => {
            let f = |rho: f64| k1 * (2.0 * rho).powf(e1) + k2 * (2.0 * rho).powf(e2) - 0.125;
            let rho0 = bisect_log(f, true)?;
            (rho0, 0.125 / (k3 * rho0.powf(e3)))
        }
        Regime::Other => unreachable!(),
    };

    Ok(GeometryConstants {
        regime,
        rho0,
        beta0,
        k1,
        k2,
        k3,
        gn_alpha_p1: alpha1,
        gn_alpha_p2: alpha2,
        gn_c_p1: gn.c_p1,
        gn_c_p2: gn.c_p2,
        gn_c_cross: gn.c_cross,
        holder_q: q,
        gn_source: gn.source,
    })
}

/// Root of a monotone function of `rho > 0` by bisection in `ln rho` to
/// relative tolerance `1e-10`. `increasing` tells the direction; the returned
/// endpoint always satisfies `f <= 0`.
fn bisect_log(f: impl Fn(f64) -> f64, increasing: bool) -> Result<f64> {
    let mut lo = 0.0f64; // ln rho
    let mut hi = 0.0f64;
    let neg_side_low = increasing; // f < 0 at small rho when increasing
    let below = |x: f64| f(x.exp()) <= 0.0;
    // expand the bracket
    let mut step = 1.0;
    let mut guard = 0;
    while below(lo) != neg_side_low {
        lo -= step;
        step *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Geometry("cannot bracket rho0 from below".into()));
        }
    }
    step = 1.0;
    guard = 0;
    while below(hi) == neg_side_low {
        hi += step;
        step *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Geometry("cannot bracket rho0 from above".into()));
        }
    }
    while hi - lo > 1e-11 {
        let mid = 0.5 * (lo + hi);
        if below(mid) == neg_side_low {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if increasing { lo.exp() } else { hi.exp() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h0() -> Params {
        Params {
            dim: 3,
            p1: 2.5,
            p2: 2.5,
            r1: 2.0,
            r2: 2.0,
            mu1: 1.0,
            mu2: 1.0,
            beta: 0.1,
            a1: 1.0,
            a2: 1.0,
        }
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(&h0()).unwrap(), Regime::H0);
        let h1 = Params {
            p1: 4.0,
            p2: 4.0,
            r1: 1.5,
            r2: 1.5,
            ..h0()
        };
        assert_eq!(classify_regime(&h1).unwrap(), Regime::H1);
        let other = Params { p2: 4.0, ..h0() };
        assert_eq!(classify_regime(&other).unwrap(), Regime::Other);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(classify_regime(&Params { p1: 2.0, ..h0() }).is_err());
        assert!(classify_regime(&Params { p1: 6.0, ..h0() }).is_err());
        assert!(classify_regime(&Params { r1: 1.0, ..h0() }).is_err());
        assert!(classify_regime(&Params { mu2: 0.0, ..h0() }).is_err());
        assert!(classify_regime(&Params { a1: -1.0, ..h0() }).is_err());
    }

    #[test]
    fn gn_exponent_values() {
        assert_eq!(gn_exponent(2, 4.0).unwrap(), 0.5);
        assert_eq!(gn_exponent(5, 2.0).unwrap(), 0.0);
        assert_eq!(gn_exponent(3, 4.0).unwrap(), 0.75);
        assert!(gn_exponent(3, 6.5).is_err());
        assert!(gn_exponent(3, 1.5).is_err());
    }

    fn fake_gn() -> GnConstants {
        GnConstants {
            c_p1: 0.7,
            c_p2: 0.7,
            c_cross: 0.45,
            source: GnSource::Analytic,
        }
    }

    #[test]
    fn thresholds_bind_at_one_eighth() {
        let params = h0();
        let c = compute_thresholds(&params, &fake_gn()).unwrap();
        let rep = c.report(&params);
        assert!(rep.rho_condition <= 0.125 && (rep.rho_condition - 0.125).abs() < 1e-8);
        assert!(rep.beta_condition <= 0.125 + 1e-15);
        assert!((rep.beta_condition - 0.125).abs() < 1e-8);
        assert!((c.holder_q - 2.0).abs() < 1e-15);
        // J >= rho/4 on the annulus
        for k in 0..=20 {
            let rho = c.rho0 * (1.0 + k as f64 / 20.0);
            assert!(c.energy_lower_bound(&params, rho, c.beta0) >= 0.25 * c.rho0 * (1.0 - 1e-9));
        }
    }

    #[test]
    fn beta0_independent_of_beta() {
        let a = compute_thresholds(&h0(), &fake_gn()).unwrap();
        let b = compute_thresholds(&h0().with_beta(5.0), &fake_gn()).unwrap();
        assert_eq!(a.beta0, b.beta0);
    }

    #[test]
    fn h1_thresholds() {
        let params = Params {
            p1: 4.0,
            p2: 4.0,
            r1: 1.4,
            r2: 1.4,
            ..h0()
        };
        let c = compute_thresholds(&params, &fake_gn()).unwrap();
        let rep = c.report(&params);
        assert!((rep.rho_condition - 0.125).abs() < 1e-8 && rep.rho_condition <= 0.125);
        assert!((rep.beta_condition - 0.125).abs() < 1e-8);
        for k in 0..=20 {
            let rho = c.rho0 * (1.0 + k as f64 / 20.0);
            assert!(c.energy_lower_bound(&params, rho, c.beta0) >= 0.25 * c.rho0 * (1.0 - 1e-9));
        }
    }

    #[test]
    fn other_regime_rejected() {
        let params = Params { p2: 4.0, ..h0() };
        assert!(matches!(
            compute_thresholds(&params, &fake_gn()),
            Err(Error::Regime(_))
        ));
    }
}
