//! Student-t and Fernández–Steel skew-t distributions.
//!
//! The CDF goes through the regularized incomplete beta function, the
//! quantile through safeguarded Newton iteration on the CDF. Non-integer
//! degrees of freedom are supported throughout.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::special::{beta_reg, normal_quantile};

const NEWTON_MAX_ITER: usize = 100;
const BISECT_MAX_ITER: usize = 2000;

/// Degrees of freedom of a copula or innovation law; always `> 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DegreesOfFreedom(f64);

impl DegreesOfFreedom {
    pub fn new(n: f64) -> Result<Self> {
        if n.is_finite() && n > 1.0 {
            Ok(Self(n))
        } else {
            Err(Error::domain(format!(
                "degrees of freedom must be > 1, got {n}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Student-t law with `n > 0` degrees of freedom.
///
/// Construction precomputes the log normalising constant, so repeated
/// evaluation at fixed `n` is cheap.
#[derive(Debug, Clone, Copy)]
pub struct StudentT {
    n: f64,
    ln_norm: f64,
}

impl StudentT {
    pub fn new(n: f64) -> Result<Self> {
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::domain(format!(
                "degrees of freedom must be positive and finite, got {n}"
            )));
        }
        let ln_norm = ln_gamma(0.5 * (n + 1.0)) - ln_gamma(0.5 * n) - 0.5 * (n * PI).ln();
        Ok(Self { n, ln_norm })
    }

    pub fn dof(&self) -> f64 {
        self.n
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_norm - 0.5 * (self.n + 1.0) * (x * x / self.n).ln_1p()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x == 0.0 {
            return 0.5;
        }
        if x.is_infinite() {
            return if x > 0.0 { 1.0 } else { 0.0 };
        }
        let x2 = x * x;
        let denom = self.n + x2;
        // 0.5 * I_{n/(n+x²)}(n/2, 1/2) is the tail mass beyond |x|.
        let tail = 0.5 * beta_reg(0.5 * self.n, 0.5, self.n / denom, x2 / denom);
        if x < 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }

    /// Inverse CDF. `p` must lie in `(0, 1)`; `p = 1/2` maps to exactly 0.
    pub fn quantile(&self, p: f64) -> f64 {
        if p.is_nan() || p <= 0.0 || p >= 1.0 {
            return if p == 0.0 {
                f64::NEG_INFINITY
            } else if p == 1.0 {
                f64::INFINITY
            } else {
                f64::NAN
            };
        }
        if p == 0.5 {
            return 0.0;
        }
        if p > 0.5 {
            -self.lower_quantile(1.0 - p)
        } else {
            self.lower_quantile(p)
        }
    }

    fn seed(&self, p: f64) -> f64 {
        let z = normal_quantile(p);
        let n = self.n;
        let z3 = z * z * z;
        let cornish_fisher =
            z + (z3 + z) / (4.0 * n) + (5.0 * z3 * z * z + 16.0 * z3 + 3.0 * z) / (96.0 * n * n);
        // Power-law left tail: F(x) ≈ c n^{(n-1)/2} |x|^{-n}.
        let ln_tail = (self.ln_norm + 0.5 * (n - 1.0) * n.ln() - p.ln()) / n;
        let tail = -ln_tail.exp();
        if tail < cornish_fisher && p < 0.05 {
            tail
        } else {
            cornish_fisher
        }
    }

    /// Quantile for `p < 1/2` (negative result).
    fn lower_quantile(&self, p: f64) -> f64 {
        let mut hi = 0.0_f64;
        let mut lo = self.seed(p).min(-1.0);
        while self.cdf(lo) > p {
            hi = lo;
            lo *= 2.0;
            if !lo.is_finite() {
                return f64::NEG_INFINITY;
            }
        }
        let mut x = self.seed(p);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        for _ in 0..NEWTON_MAX_ITER {
            let f = self.cdf(x) - p;
            if f == 0.0 {
                return x;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step = f / self.pdf(x);
            let mut next = x - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() {
                return next;
            }
            x = next;
        }
        // Newton stalled; finish by bisection on the current bracket.
        for _ in 0..BISECT_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) > p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("argument must be finite, got {x}")))
    }
}

fn check_dof(n: f64) -> Result<StudentT> {
    if !(n.is_finite() && n >= 1.0) {
        return Err(Error::domain(format!(
            "degrees of freedom must be >= 1, got {n}"
        )));
    }
    StudentT::new(n)
}

/// Student-t CDF. Accepts `n ≥ 1` (the Cauchy case included).
pub fn t_cdf(x: f64, n: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(check_dof(n)?.cdf(x))
}

pub fn t_quantile(p: f64, n: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "probability must be in (0, 1), got {p}"
        )));
    }
    Ok(check_dof(n)?.quantile(p))
}

pub fn t_pdf(x: f64, n: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(check_dof(n)?.pdf(x))
}

/// Degrees of freedom and skewness of a Fernández–Steel skew-t law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewTParams {
    pub m: f64,
    pub xi: f64,
}

impl SkewTParams {
    pub fn new(m: f64, xi: f64) -> Result<Self> {
        if !(m.is_finite() && m > 2.0) {
            return Err(Error::domain(format!(
                "skew-t degrees of freedom must be > 2, got {m}"
            )));
        }
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::domain(format!(
                "skew-t skewness must be positive, got {xi}"
            )));
        }
        Ok(Self { m, xi })
    }
}

/// Fernández–Steel skew-t, optionally shifted and scaled to zero mean and
/// unit variance.
///
/// The base law has density `2/(ξ + 1/ξ) f_m(ξx)` for `x < 0` and
/// `2/(ξ + 1/ξ) f_m(x/ξ)` for `x ≥ 0`; `ξ = 1` is the symmetric t.
#[derive(Debug, Clone, Copy)]
pub struct SkewT {
    params: SkewTParams,
    base: StudentT,
    mean: f64,
    sd: f64,
}

impl SkewT {
    pub fn new(params: SkewTParams, standardized: bool) -> Result<Self> {
        let params = SkewTParams::new(params.m, params.xi)?;
        let base = StudentT::new(params.m)?;
        let (mean, sd) = if standardized {
            Self::moments(params)
        } else {
            (0.0, 1.0)
        };
        Ok(Self {
            params,
            base,
            mean,
            sd,
        })
    }

    /// Mean and standard deviation of the unstandardized law.
    pub fn moments(params: SkewTParams) -> (f64, f64) {
        let SkewTParams { m, xi } = params;
        // E|T| for the symmetric t with m degrees of freedom.
        let abs_mean = 2.0 * m.sqrt() * (ln_gamma(0.5 * (m + 1.0)) - ln_gamma(0.5 * m)).exp()
            / (PI.sqrt() * (m - 1.0));
        let mean = abs_mean * (xi - 1.0 / xi);
        let second = m / (m - 2.0) * (xi.powi(3) + xi.powi(-3)) / (xi + 1.0 / xi);
        (mean, (second - mean * mean).sqrt())
    }

    pub fn params(&self) -> SkewTParams {
        self.params
    }

    fn base_ln_pdf(&self, x: f64) -> f64 {
        let xi = self.params.xi;
        let ln_c = (2.0 / (xi + 1.0 / xi)).ln();
        if x < 0.0 {
            ln_c + self.base.ln_pdf(xi * x)
        } else {
            ln_c + self.base.ln_pdf(x / xi)
        }
    }

    fn base_cdf(&self, x: f64) -> f64 {
        let xi2 = self.params.xi * self.params.xi;
        if x < 0.0 {
            2.0 / (xi2 + 1.0) * self.base.cdf(self.params.xi * x)
        } else {
            1.0 / (1.0 + xi2) + 2.0 * xi2 / (1.0 + xi2) * (self.base.cdf(x / self.params.xi) - 0.5)
        }
    }

    fn base_quantile(&self, p: f64) -> f64 {
        let xi = self.params.xi;
        let xi2 = xi * xi;
        let split = 1.0 / (1.0 + xi2);
        if p < split {
            self.base.quantile(0.5 * p * (1.0 + xi2)) / xi
        } else {
            xi * self
                .base
                .quantile(0.5 + (p - split) * (1.0 + xi2) / (2.0 * xi2))
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.sd.ln() + self.base_ln_pdf(self.mean + self.sd * x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.base_cdf(self.mean + self.sd * x)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        (self.base_quantile(p) - self.mean) / self.sd
    }
}

/// Unstandardized two-branch skew-t density.
pub fn skew_t_pdf(x: f64, params: SkewTParams) -> Result<f64> {
    check_finite(x)?;
    Ok(SkewT::new(params, false)?.pdf(x))
}

pub fn skew_t_cdf(x: f64, params: SkewTParams, standardized: bool) -> Result<f64> {
    check_finite(x)?;
    Ok(SkewT::new(params, standardized)?.cdf(x))
}

pub fn skew_t_quantile(p: f64, params: SkewTParams, standardized: bool) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "probability must be in (0, 1), got {p}"
        )));
    }
    Ok(SkewT::new(params, standardized)?.quantile(p))
}

/// Student-t rescaled to unit variance (`m > 2`), the innovation law of the
/// AR-GARCH marginal.
#[derive(Debug, Clone, Copy)]
pub struct UnitVarianceT {
    base: StudentT,
    scale: f64,
}

impl UnitVarianceT {
    pub fn new(m: f64) -> Result<Self> {
        if !(m.is_finite() && m > 2.0) {
            return Err(Error::domain(format!(
                "unit-variance t needs more than 2 degrees of freedom, got {m}"
            )));
        }
        Ok(Self {
            base: StudentT::new(m)?,
            scale: ((m - 2.0) / m).sqrt(),
        })
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        self.base.ln_pdf(z / self.scale) - self.scale.ln()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        self.base.cdf(z / self.scale)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.scale * self.base.quantile(p)
    }
}
