//! Probability-equivalent levels of CoVaR and VaR.
//!
//! For a risk level `v`, the set `A(v)` collects every `u ∈ (0, 1)` with
//! `CoVaR_{v,u}[Y|X] = VaR_v[Y]`, i.e. every solution of `h(u) = v` where
//! `h = ∂₁C(·, v)`. For a t copula with `ρ > 0`:
//!
//! - `v = 1/2`: `A(v) = {1/2}`.
//! - `v > 1/2`: one root in `(1/2, v*)` with `v* = t_n(t_n⁻¹(v)/ρ)`, and a
//!   second root in `(0, u*)` if and only if `v > L0`.
//! - `v < 1/2`: the mirror image, with the second root in `(u*, 1)` if and
//!   only if `v < L1`.
//!
//! Squaring `h(u) = v` on the score scale gives a quadratic in
//! `a = t_n⁻¹(u)`; its two candidates are filtered by substitution, since
//! squaring also admits solutions of `h(u) = 1 − v`.

use crate::copula::{self, check_open_unit, ConditionalCdf, CopulaParams};
use crate::error::{Error, Result};
use crate::roots::bisect;

/// Residual bound for accepting a root of `h(u) = v`.
pub const ROOT_TOL: f64 = 1e-8;
/// Denominators of the closed form below this switch to bisection.
pub const DEGENERATE_DENOM: f64 = 1e-12;

/// A risk level together with copula parameters satisfying `ρ > 0`.
#[derive(Debug, Clone, Copy)]
pub struct PelcovQuery {
    v: f64,
    params: CopulaParams,
}

impl PelcovQuery {
    pub fn new(v: f64, params: CopulaParams) -> Result<Self> {
        check_open_unit("v", v)?;
        if params.rho() <= 0.0 {
            return Err(Error::domain(format!(
                "PELCoV classification is only established for rho > 0, got rho = {}",
                params.rho()
            )));
        }
        Ok(Self { v, params })
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn params(&self) -> CopulaParams {
        self.params
    }
}

/// Discriminant of the quadratic in `a = t_n⁻¹(u)`; non-negative whenever a
/// root exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discriminant(pub f64);

/// Which of CoVaR and VaR is larger at a given `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    CovarAbove,
    Equal,
    CovarBelow,
}

#[derive(Debug, Clone)]
pub struct PelcovSolution {
    pub v: f64,
    pub params: CopulaParams,
    /// `A(v)` in ascending order.
    pub roots: Vec<f64>,
    /// The root guaranteed to exist: in `(1/2, v*)` for `v > 1/2`,
    /// `(v*, 1/2)` for `v < 1/2`, and `1/2` itself at `v = 1/2`.
    pub principal: f64,
    /// The optional tail root.
    pub secondary: Option<f64>,
    pub v_star: f64,
    pub u_star: Option<f64>,
    pub l0: f64,
    /// `v > L0` for `v > 1/2`, `v < L1` for `v < 1/2`.
    pub second_root_predicate: bool,
    /// Open interval of `u` where CoVaR is strictly below VaR.
    pub covar_below_var_region: (f64, f64),
    pub discriminant: Option<Discriminant>,
    /// Whether the closed form was bypassed for bisection.
    pub used_fallback: bool,
}

/// `v* = t_n(t_n⁻¹(v)/ρ)`, the level with `h(v*) = 1/2`.
pub fn v_star(q: &PelcovQuery) -> f64 {
    let cond = ConditionalCdf::new(q.v, q.params).expect("validated query");
    v_star_with(&cond)
}

/// `1 − v* = t_n(−t_n⁻¹(v)/ρ)`, accurate when `v*` is close to 1.
pub fn v_star_complement(q: &PelcovQuery) -> f64 {
    let cond = ConditionalCdf::new(q.v, q.params).expect("validated query");
    cond.t_n().cdf(-cond.score_v() / cond.params().rho())
}

fn v_star_with(cond: &ConditionalCdf) -> f64 {
    cond.t_n().cdf(cond.score_v() / cond.params().rho())
}

/// Discriminant `k = c²(1−ρ²)(ρ²n(n+1) + b²(n+1) − c²n(1−ρ²))` with
/// `b = t_n⁻¹(v)` and `c = t_{n+1}⁻¹(v)`.
pub fn discriminant(q: &PelcovQuery) -> Discriminant {
    let n = q.params.n();
    let rho = q.params.rho();
    let b = crate::tdist::StudentT::new(n).expect("n > 1").quantile(q.v);
    let c = crate::tdist::StudentT::new(n + 1.0)
        .expect("n > 1")
        .quantile(q.v);
    Discriminant(discriminant_raw(n, rho, b, c))
}

fn discriminant_raw(n: f64, rho: f64, b: f64, c: f64) -> f64 {
    let one_minus = (1.0 - rho) * (1.0 + rho);
    c * c * one_minus * (rho * rho * n * (n + 1.0) + b * b * (n + 1.0) - c * c * n * one_minus)
}

/// Solves `h(u) = v` and classifies the solution set.
pub fn solve(q: &PelcovQuery) -> PelcovSolution {
    let params = q.params;
    let v = q.v;
    let l0 = copula::lower_limit(params);
    if v == 0.5 {
        return PelcovSolution {
            v,
            params,
            roots: vec![0.5],
            principal: 0.5,
            secondary: None,
            v_star: 0.5,
            u_star: None,
            l0,
            second_root_predicate: false,
            covar_below_var_region: (0.0, 0.5),
            discriminant: None,
            used_fallback: false,
        };
    }
    let cond = ConditionalCdf::new(v, params).expect("validated query");
    let n = params.n();
    let rho = params.rho();
    let b = cond.score_v();
    let c = cond.t_n1().quantile(v);
    let v_star = v_star_with(&cond);
    let u_star = cond.t_n().cdf(-rho * n / b);
    let upper = v > 0.5;
    let second_root_predicate = if upper { v > l0 } else { v < 1.0 - l0 };

    let denom = rho * rho * (n + 1.0) - c * c * (1.0 - rho) * (1.0 + rho);
    let k = discriminant_raw(n, rho, b, c);
    let mut used_fallback = false;
    let mut roots: Vec<f64> = Vec::with_capacity(2);
    if denom.abs() > DEGENERATE_DENOM {
        let sqrt_k = k.max(0.0).sqrt();
        for sign in [1.0, -1.0] {
            let a = (b * rho * (n + 1.0) + sign * sqrt_k) / denom;
            let u = cond.t_n().cdf(a);
            if !(u > 0.0 && u < 1.0) {
                continue;
            }
            // Squaring admitted h(u) = 1 − v as well; keep the sign branch
            // matching t_{n+1}⁻¹(v) and confirm by substitution.
            let right_branch = (b - rho * a).signum() == c.signum();
            if right_branch && (cond.eval(u) - v).abs() <= ROOT_TOL {
                roots.push(u);
            }
        }
        roots.sort_by(f64::total_cmp);
        roots.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    }
    let expected = 1 + usize::from(second_root_predicate);
    if roots.len() != expected {
        // Degenerate denominator, or a tail root lost to underflow: locate
        // roots by bisection on brackets the shape of h guarantees.
        let by_bisection = bracketed_roots(&cond, v_star, u_star, second_root_predicate);
        if by_bisection.len() > roots.len() || roots.is_empty() {
            roots = by_bisection;
            used_fallback = true;
        }
    }

    let (principal, secondary) = if upper {
        match roots.as_slice() {
            [p] => (*p, None),
            [s, p] => (*p, Some(*s)),
            _ => unreachable!("h(u) = v has one or two roots"),
        }
    } else {
        match roots.as_slice() {
            [p] => (*p, None),
            [p, s] => (*p, Some(*s)),
            _ => unreachable!("h(u) = v has one or two roots"),
        }
    };
    let region = if upper {
        (secondary.unwrap_or(0.0), principal)
    } else {
        (principal, secondary.unwrap_or(1.0))
    };
    PelcovSolution {
        v,
        params,
        roots,
        principal,
        secondary,
        v_star,
        u_star: Some(u_star),
        l0,
        second_root_predicate,
        covar_below_var_region: region,
        discriminant: Some(Discriminant(k)),
        used_fallback,
    }
}

/// Bisection on the score scale over the intervals where the shape of `h`
/// guarantees a sign change of `h − v`.
fn bracketed_roots(cond: &ConditionalCdf, v_star: f64, u_star: f64, second: bool) -> Vec<f64> {
    let v = cond.v();
    let t_n = cond.t_n();
    let g = |a: f64| cond.at_score(a) - v;
    let to_u = |a: f64| t_n.cdf(a);
    let mut out = Vec::with_capacity(2);
    let a_star = t_n.quantile(u_star);
    let a_vstar = t_n.quantile(v_star);
    let principal = if v > 0.5 {
        bisect(g, 0.0, a_vstar, 1e-15)
    } else {
        bisect(g, a_vstar, 0.0, 1e-15)
    };
    out.extend(principal.map(to_u));
    if second {
        // Walk outward from the critical point until h − v changes sign.
        let dir = if v > 0.5 { -1.0 } else { 1.0 };
        let mut far = a_star + dir * 1.0;
        let start_sign = g(a_star).signum();
        let mut steps = 0;
        while g(far).signum() == start_sign && steps < 200 {
            far = a_star + (far - a_star) * 2.0;
            steps += 1;
        }
        let (lo, hi) = if far < a_star {
            (far, a_star)
        } else {
            (a_star, far)
        };
        if let Some(a) = bisect(g, lo, hi, 1e-15 * far.abs().max(1.0)) {
            out.push(to_u(a));
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Copula-scale CoVaR level: the `w` with `∂₁C(u, w) = v`, found by
/// inverting `h` in its second argument.
pub fn covar_level(u: f64, v: f64, params: CopulaParams) -> Result<f64> {
    check_open_unit("u", u)?;
    check_open_unit("v", v)?;
    let n = params.n();
    let t_n = crate::tdist::StudentT::new(n)?;
    let t_n1 = crate::tdist::StudentT::new(n + 1.0)?;
    let a = t_n.quantile(u);
    let scale = ((n + a * a) / (n + 1.0)).sqrt() * params.rho_complement();
    Ok(t_n.cdf(params.rho() * a + scale * t_n1.quantile(v)))
}

/// Compares CoVaR at level `u` with VaR at level `v`.
pub fn classify(u: f64, q: &PelcovQuery) -> Result<Ordering> {
    let diff = copula::h(u, q.v, q.params)? - q.v;
    Ok(if diff.abs() <= ROOT_TOL {
        Ordering::Equal
    } else if diff < 0.0 {
        Ordering::CovarAbove
    } else {
        Ordering::CovarBelow
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query(v: f64, rho: f64, n: f64) -> PelcovQuery {
        PelcovQuery::new(v, CopulaParams::new(rho, n).unwrap()).unwrap()
    }

    #[test]
    fn half_level_is_exact() {
        let s = solve(&query(0.5, 0.3, 4.0));
        assert_eq!(s.roots, vec![0.5]);
        assert_eq!(s.v_star, 0.5);
        assert!(s.u_star.is_none());
    }

    #[test]
    fn rejects_nonpositive_rho() {
        let p = CopulaParams::new(-0.2, 3.0).unwrap();
        assert!(PelcovQuery::new(0.9, p).is_err());
        let p = CopulaParams::new(0.0, 3.0).unwrap();
        assert!(PelcovQuery::new(0.9, p).is_err());
    }

    #[test]
    fn v_star_ordering() {
        let vs = v_star(&query(0.95, 0.5, 9.7595));
        assert!(vs > 0.95 && vs < 1.0);
        let vs = v_star(&query(0.05, 0.5, 9.7595));
        assert!(vs < 0.05);
    }

    #[test]
    fn high_rho_has_single_root() {
        let q = query(0.99, 0.7, 9.7595);
        let s = solve(&q);
        assert_eq!(s.roots.len(), 1);
        assert!(s.principal > 0.5 && s.principal < s.v_star);
        assert!(!s.second_root_predicate);
    }

    #[test]
    fn low_rho_has_two_roots() {
        let q = query(0.99, 0.2, 3.0);
        let s = solve(&q);
        assert!(s.second_root_predicate);
        assert_eq!(s.roots.len(), 2);
        let cond = ConditionalCdf::new(0.99, q.params()).unwrap();
        for &r in &s.roots {
            assert!((cond.eval(r) - 0.99).abs() <= ROOT_TOL);
        }
        let us = s.u_star.unwrap();
        assert!(s.secondary.unwrap() < us);
        assert_eq!(s.covar_below_var_region, (s.roots[0], s.roots[1]));
    }

    #[test]
    fn lower_level_mirror() {
        let s = solve(&query(0.05, 0.3, 2.0));
        assert!(s.principal > s.v_star && s.principal < 0.5);
        assert_eq!(s.covar_below_var_region.0, s.principal);
    }

    #[test]
    fn covar_level_fixed_point_and_symmetry() {
        let q = query(0.95, 0.5, 5.0);
        let s = solve(&q);
        let w = covar_level(s.principal, 0.95, q.params()).unwrap();
        assert!((w - 0.95).abs() < 1e-10);
        let w = covar_level(0.5, 0.5, q.params()).unwrap();
        assert!((w - 0.5).abs() < 1e-15);
    }

    #[test]
    fn classify_matches_region() {
        let q = query(0.95, 0.5, 5.0);
        let s = solve(&q);
        assert_eq!(classify(s.principal, &q).unwrap(), Ordering::Equal);
        assert_eq!(classify(0.999, &q).unwrap(), Ordering::CovarAbove);
        let (a, b) = s.covar_below_var_region;
        assert_eq!(classify(0.5 * (a + b), &q).unwrap(), Ordering::CovarBelow);
    }

    #[test]
    fn discriminant_nonnegative() {
        for &v in &[0.01, 0.2, 0.7, 0.999] {
            for &rho in &[0.05, 0.5, 0.95] {
                assert!(discriminant(&query(v, rho, 3.0)).0 >= 0.0);
            }
        }
    }
}
