//! Bivariate Student-t copula: conditional CDF, CDF, density, critical point,
//! boundary limits and tail dependence.
//!
//! Everything here is written in terms of t scores `a = t_n⁻¹(u)`,
//! `b = t_n⁻¹(v)`. The conditional CDF is
//!
//! ```text
//! h(u) = ∂₁C(u, v) = t_{n+1}( (b − ρa) / sqrt((n + a²)(1 − ρ²)/(n + 1)) )
//! ```
//!
//! Functions are total on the open unit interval; boundary behaviour of `h`
//! is available through [`limits`].

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::tdist::{DegreesOfFreedom, StudentT};

/// Correlation and degrees of freedom of a bivariate t copula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaParams {
    rho: f64,
    n: DegreesOfFreedom,
}

impl CopulaParams {
    pub fn new(rho: f64, n: f64) -> Result<Self> {
        if !(rho.is_finite() && rho.abs() < 1.0) {
            return Err(Error::domain(format!(
                "correlation must lie in (-1, 1), got {rho}"
            )));
        }
        Ok(Self {
            rho,
            n: DegreesOfFreedom::new(n)?,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n(&self) -> f64 {
        self.n.value()
    }

    pub fn dof(&self) -> DegreesOfFreedom {
        self.n
    }

    /// `sqrt(1 − ρ²)` without cancellation near `|ρ| = 1`.
    pub(crate) fn rho_complement(&self) -> f64 {
        ((1.0 - self.rho) * (1.0 + self.rho)).sqrt()
    }
}

pub(crate) fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1), got {x}")))
    }
}

/// `h(·) = ∂₁C(·, v)` for a fixed `v`, with the t laws and `t_n⁻¹(v)`
/// precomputed.
#[derive(Debug, Clone, Copy)]
pub struct ConditionalCdf {
    params: CopulaParams,
    t_n: StudentT,
    t_n1: StudentT,
    v: f64,
    score_v: f64,
}

impl ConditionalCdf {
    pub fn new(v: f64, params: CopulaParams) -> Result<Self> {
        check_open_unit("v", v)?;
        let n = params.n();
        let t_n = StudentT::new(n)?;
        Ok(Self {
            params,
            t_n,
            t_n1: StudentT::new(n + 1.0)?,
            v,
            score_v: t_n.quantile(v),
        })
    }

    pub fn params(&self) -> CopulaParams {
        self.params
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// `t_n⁻¹(v)`.
    pub fn score_v(&self) -> f64 {
        self.score_v
    }

    pub fn t_n(&self) -> &StudentT {
        &self.t_n
    }

    pub fn t_n1(&self) -> &StudentT {
        &self.t_n1
    }

    /// Argument of `t_{n+1}` in `h`, as a function of the score `a = t_n⁻¹(u)`.
    pub fn argument(&self, a: f64) -> f64 {
        let n = self.params.n();
        let rho = self.params.rho;
        let scale = ((n + a * a) / (n + 1.0)).sqrt() * self.params.rho_complement();
        (self.score_v - rho * a) / scale
    }

    /// `h` evaluated at the score `a = t_n⁻¹(u)`.
    pub fn at_score(&self, a: f64) -> f64 {
        self.t_n1.cdf(self.argument(a))
    }

    /// `h(u)` for `u ∈ (0, 1)`.
    pub fn eval(&self, u: f64) -> f64 {
        self.at_score(self.t_n.quantile(u))
    }

    /// `h(1 − q)` from the upper-tail probability `q`, keeping full
    /// precision for `u` within a few ulps of 1.
    pub fn eval_upper(&self, q: f64) -> f64 {
        self.at_score(-self.t_n.quantile(q))
    }
}

/// `h(u, v) = ∂₁C(u, v)`, the conditional probability `P(V ≤ v | U = u)`.
pub fn h(u: f64, v: f64, params: CopulaParams) -> Result<f64> {
    check_open_unit("u", u)?;
    Ok(ConditionalCdf::new(v, params)?.eval(u))
}

/// Copula CDF `C(u, v) = ∫₀ᵘ h(s, v) ds`, integrated on the score scale
/// `s = t_n(x)` by adaptive quadrature.
pub fn copula_cdf(u: f64, v: f64, params: CopulaParams) -> Result<f64> {
    for (name, x) in [("u", u), ("v", v)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("{name} must lie in [0, 1], got {x}")));
        }
    }
    if u == 0.0 || v == 0.0 {
        return Ok(0.0);
    }
    if u == 1.0 {
        return Ok(v);
    }
    if v == 1.0 {
        return Ok(u);
    }
    let cond = ConditionalCdf::new(v, params)?;
    let upper = cond.t_n.quantile(u);
    let integral = quad::integrate_to(
        |x| cond.at_score(x) * cond.t_n.pdf(x),
        upper,
        Tolerance {
            abs: 1e-300,
            rel: 1e-11,
        },
    );
    Ok(integral.value.clamp(0.0, u.min(v)))
}

/// Log density of the t copula evaluated directly on scores, reusable across
/// many observations at fixed `n`.
#[derive(Debug, Clone, Copy)]
pub struct TCopulaDensity {
    n: f64,
    t_n: StudentT,
    ln_joint_norm: f64,
}

impl TCopulaDensity {
    pub fn new(n: f64) -> Result<Self> {
        let n = DegreesOfFreedom::new(n)?.value();
        Ok(Self {
            n,
            t_n: StudentT::new(n)?,
            ln_joint_norm: ln_gamma(0.5 * (n + 2.0))
                - ln_gamma(0.5 * n)
                - (n * std::f64::consts::PI).ln(),
        })
    }

    pub fn t_n(&self) -> &StudentT {
        &self.t_n
    }

    /// `log c(u, v)` at scores `a = t_n⁻¹(u)`, `b = t_n⁻¹(v)`.
    pub fn ln_density(&self, a: f64, b: f64, rho: f64) -> f64 {
        let one_minus = (1.0 - rho) * (1.0 + rho);
        let quad_form = (a * a - 2.0 * rho * a * b + b * b) / (self.n * one_minus);
        let ln_joint =
            self.ln_joint_norm - 0.5 * one_minus.ln() - 0.5 * (self.n + 2.0) * quad_form.ln_1p();
        ln_joint - self.t_n.ln_pdf(a) - self.t_n.ln_pdf(b)
    }
}

/// Copula density: the bivariate t density at the scores divided by the
/// product of the univariate t densities.
pub fn copula_pdf(u: f64, v: f64, params: CopulaParams) -> Result<f64> {
    check_open_unit("u", u)?;
    check_open_unit("v", v)?;
    let dens = TCopulaDensity::new(params.n())?;
    let a = dens.t_n.quantile(u);
    let b = dens.t_n.quantile(v);
    Ok(dens.ln_density(a, b, params.rho).exp())
}

/// Critical point `u* = t_n(−ρn / t_n⁻¹(v))` of `h`; `None` at `v = 1/2`
/// where `h` is strictly decreasing. Requires `ρ > 0`.
pub fn u_star(v: f64, params: CopulaParams) -> Result<Option<f64>> {
    check_open_unit("v", v)?;
    if params.rho <= 0.0 {
        return Err(Error::domain(format!(
            "critical point requires rho > 0, got {}",
            params.rho
        )));
    }
    let t_n = StudentT::new(params.n())?;
    let b = t_n.quantile(v);
    if b == 0.0 {
        return Ok(None);
    }
    Ok(Some(t_n.cdf(-params.rho * params.n() / b)))
}

/// Boundary limits `(L0, L1)` of `h` as `u → 0⁺` and `u → 1⁻`. They do not
/// depend on `v`; `L1 = 1 − L0` exactly.
pub fn limits(v: f64, params: CopulaParams) -> Result<(f64, f64)> {
    check_open_unit("v", v)?;
    let l0 = lower_limit(params);
    Ok((l0, 1.0 - l0))
}

/// `L0 = t_{n+1}(ρ sqrt(n+1) / sqrt(1−ρ²))`.
pub fn lower_limit(params: CopulaParams) -> f64 {
    let n = params.n();
    let t_n1 = StudentT::new(n + 1.0).expect("n > 1");
    t_n1.cdf(params.rho * (n + 1.0).sqrt() / params.rho_complement())
}

/// Tail dependence `λ_L = λ_U = 2 t_{n+1}(−sqrt((n+1)(1−ρ)/(1+ρ)))`.
pub fn tail_dependence(params: CopulaParams) -> f64 {
    let n = params.n();
    let rho = params.rho;
    let t_n1 = StudentT::new(n + 1.0).expect("n > 1");
    2.0 * t_n1.cdf(-((n + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt())
}

/// Shape summary of `h(·)` at a fixed `v`.
#[derive(Debug, Clone, Copy)]
pub struct ConditionalCurve {
    pub params: CopulaParams,
    pub v: f64,
    pub u_star: Option<f64>,
    pub l0: f64,
    pub l1: f64,
}

impl ConditionalCurve {
    pub fn new(v: f64, params: CopulaParams) -> Result<Self> {
        let (l0, l1) = limits(v, params)?;
        Ok(Self {
            params,
            v,
            u_star: u_star(v, params)?,
            l0,
            l1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(rho: f64, n: f64) -> CopulaParams {
        CopulaParams::new(rho, n).unwrap()
    }

    #[test]
    fn h_at_centre() {
        for &(rho, n) in &[(0.1, 1.5), (0.7, 9.7595), (-0.4, 30.0)] {
            assert_eq!(h(0.5, 0.5, p(rho, n)).unwrap(), 0.5);
        }
    }

    #[test]
    fn h_radial_symmetry() {
        let q = p(0.6, 5.0);
        let a = h(0.2, 0.8, q).unwrap();
        let b = h(0.8, 0.2, q).unwrap();
        assert!((a - (1.0 - b)).abs() < 1e-14);
    }

    #[test]
    fn h_rejects_boundary() {
        assert!(h(0.0, 0.3, p(0.5, 3.0)).is_err());
        assert!(h(1.0, 0.3, p(0.5, 3.0)).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(CopulaParams::new(1.0, 3.0).is_err());
        assert!(CopulaParams::new(0.3, 1.0).is_err());
        assert!(CopulaParams::new(-0.99, 1.01).is_ok());
    }

    #[test]
    fn cdf_margins() {
        let q = p(0.4, 2.0);
        assert_eq!(copula_cdf(0.37, 1.0, q).unwrap(), 0.37);
        assert_eq!(copula_cdf(0.0, 0.6, q).unwrap(), 0.0);
        // The integral route recovers the margin too.
        let c = copula_cdf(0.37, 1.0 - 1e-15, q).unwrap();
        assert!((c - 0.37).abs() < 1e-10);
    }

    #[test]
    fn cdf_frechet_bounds() {
        let q = p(0.8, 4.0);
        for &(u, v) in &[(0.1, 0.2), (0.5, 0.5), (0.9, 0.3), (0.99, 0.98)] {
            let c = copula_cdf(u, v, q).unwrap();
            assert!(c >= (u + v - 1.0_f64).max(0.0) - 1e-12 && c <= u.min(v) + 1e-12);
        }
    }

    #[test]
    fn pdf_symmetry_and_nonindependence() {
        let q = p(0.5, 4.0);
        let a = copula_pdf(0.2, 0.7, q).unwrap();
        let b = copula_pdf(0.7, 0.2, q).unwrap();
        assert!((a - b).abs() < 1e-13);
        assert!(copula_pdf(0.5, 0.5, p(0.0, 3.0)).unwrap() > 1.0);
    }

    #[test]
    fn u_star_absent_at_half() {
        assert_eq!(u_star(0.5, p(0.4, 3.0)).unwrap(), None);
        assert!(u_star(0.9, p(-0.2, 3.0)).is_err());
        assert!(u_star(0.9, p(0.2, 3.0)).unwrap().unwrap() < 0.5);
        assert!(u_star(0.1, p(0.2, 3.0)).unwrap().unwrap() > 0.5);
    }

    #[test]
    fn limits_identities() {
        assert_eq!(limits(0.3, p(0.0, 4.0)).unwrap(), (0.5, 0.5));
        let (l0, l1) = limits(0.9, p(0.6822, 9.7595)).unwrap();
        assert_eq!(l1, 1.0 - l0);
    }

    #[test]
    fn tail_dependence_values() {
        let t4 = StudentT::new(4.0).unwrap();
        assert!((tail_dependence(p(0.0, 3.0)) - 2.0 * t4.cdf(-2.0)).abs() < 1e-15);
        assert!(tail_dependence(p(0.9, 5.0)) > tail_dependence(p(0.1, 5.0)));
    }
}
