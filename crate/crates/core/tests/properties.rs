use proptest::prelude::*;

use pelcov::copula::{self, ConditionalCdf, CopulaParams};
use pelcov::dyncopula::{self, EvolutionParams};
use pelcov::marginals::{self, ArGarchParams, MaGarchSkewParams, ReturnSeries};
use pelcov::monitor::fmt_num;
use pelcov::pelcov::{self as pl, Ordering, PelcovQuery};
use pelcov::quad::{integrate, Tolerance};
use pelcov::tdist::{SkewT, SkewTParams, StudentT, UnitVarianceT};

fn params(rho: f64, n: f64) -> CopulaParams {
    CopulaParams::new(rho, n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn t_quantile_roundtrip(p in 1e-10f64..(1.0 - 1e-10), n in 1.0f64..200.0) {
        let t = StudentT::new(n).unwrap();
        let back = t.cdf(t.quantile(p));
        prop_assert!((back - p).abs() <= 1e-12 * p.min(1.0 - p).max(1e-3), "{p} -> {back}");
    }

    #[test]
    fn t_cdf_is_symmetric(x in -50.0f64..50.0, n in 1.0f64..100.0) {
        let t = StudentT::new(n).unwrap();
        prop_assert!((t.cdf(x) + t.cdf(-x) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn skew_t_quantile_roundtrip(
        p in 1e-8f64..(1.0 - 1e-8),
        m in 2.1f64..60.0,
        xi in 0.3f64..3.0,
        standardized in any::<bool>(),
    ) {
        let d = SkewT::new(SkewTParams::new(m, xi).unwrap(), standardized).unwrap();
        let back = d.cdf(d.quantile(p));
        prop_assert!((back - p).abs() < 1e-10, "{p} -> {back}");
    }

    #[test]
    fn unit_variance_t_roundtrip(p in 1e-8f64..(1.0 - 1e-8), m in 2.05f64..100.0) {
        let d = UnitVarianceT::new(m).unwrap();
        prop_assert!((d.cdf(d.quantile(p)) - p).abs() < 1e-10);
    }

    #[test]
    fn h_is_a_cdf_in_v(u in 0.001f64..0.999, v1 in 0.001f64..0.999, v2 in 0.001f64..0.999,
                       rho in -0.95f64..0.95, n in 1.0f64..50.0) {
        let p = params(rho, n);
        let (lo, hi) = if v1 <= v2 { (v1, v2) } else { (v2, v1) };
        let (a, b) = (copula::h(u, lo, p).unwrap(), copula::h(u, hi, p).unwrap());
        prop_assert!((0.0..=1.0).contains(&a) && a <= b + 1e-15);
    }

    #[test]
    fn h_radial_symmetry(u in 0.001f64..0.999, v in 0.001f64..0.999,
                         rho in -0.95f64..0.95, n in 1.0f64..50.0) {
        let p = params(rho, n);
        let lhs = copula::h(1.0 - u, 1.0 - v, p).unwrap();
        let rhs = 1.0 - copula::h(u, v, p).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn h_integrates_to_v(v in 0.05f64..0.95, rho in 0.05f64..0.95, n in 1.5f64..30.0) {
        let p = params(rho, n);
        let cond = ConditionalCdf::new(v, p).unwrap();
        let tol = Tolerance { abs: 1e-11, rel: 1e-11 };
        let total = integrate(|u| cond.eval(u), 0.0, 1.0, tol);
        prop_assert!((total.value - v).abs() < 1e-8, "{} vs {v}", total.value);
    }

    #[test]
    fn h_shape_around_critical_point(v in 0.55f64..0.999, rho in 0.05f64..0.95, n in 1.0f64..60.0) {
        // Increasing up to u*, decreasing after, for v > 1/2 and ρ > 0.
        let p = params(rho, n);
        let cond = ConditionalCdf::new(v, p).unwrap();
        let Some(us) = copula::u_star(v, p).unwrap() else {
            return Ok(());
        };
        let grid: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (ha, hb) = (cond.eval(a), cond.eval(b));
            if b <= us {
                prop_assert!(hb >= ha - 1e-13, "not increasing on ({a}, {b}) below u* = {us}");
            } else if a >= us {
                prop_assert!(hb <= ha + 1e-13, "not decreasing on ({a}, {b}) above u* = {us}");
            }
        }
    }

    #[test]
    fn limits_match_boundary_evaluations(v in 0.05f64..0.95, rho in -0.9f64..0.9, n in 1.0f64..4.0) {
        // Convergence to the limits is algebraic in u, so only light-tailed
        // degrees of freedom are checked this close to the boundary.
        let p = params(rho, n);
        let (l0, l1) = copula::limits(v, p).unwrap();
        prop_assert_eq!(l0, copula::lower_limit(p));
        prop_assert_eq!(l1, 1.0 - l0);
        let cond = ConditionalCdf::new(v, p).unwrap();
        prop_assert!((cond.eval(1e-14) - l0).abs() < 1e-3);
        prop_assert!((cond.eval(1.0 - 1e-14) - l1).abs() < 1e-3);
    }

    #[test]
    fn tail_dependence_in_unit_interval(rho in -0.99f64..0.99, n in 1.0f64..200.0) {
        let lambda = copula::tail_dependence(params(rho, n));
        prop_assert!((0.0..=1.0).contains(&lambda));
    }

    #[test]
    fn solver_roots_solve_the_equation(v in 0.501f64..0.9999, rho in 0.02f64..0.98, n in 1.0f64..60.0) {
        let q = PelcovQuery::new(v, params(rho, n)).unwrap();
        let s = pl::solve(&q);
        let cond = ConditionalCdf::new(v, q.params()).unwrap();
        for &r in &s.roots {
            prop_assert!(r > 0.0 && r < 1.0);
            prop_assert!((cond.eval(r) - v).abs() <= 1e-8, "root {r}: h = {}", cond.eval(r));
        }
        prop_assert_eq!(s.roots.len(), 1 + usize::from(s.second_root_predicate));
        prop_assert_eq!(s.second_root_predicate, v > s.l0);
        prop_assert!(s.principal > 0.5 && s.principal < s.v_star.max(0.5 + 1e-15) + 1e-12);
        prop_assert!(s.roots.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn solver_mirror_for_low_levels(v in 0.501f64..0.999, rho in 0.02f64..0.98, n in 1.0f64..60.0) {
        let hi = pl::solve(&PelcovQuery::new(v, params(rho, n)).unwrap());
        let lo = pl::solve(&PelcovQuery::new(1.0 - v, params(rho, n)).unwrap());
        prop_assert_eq!(hi.roots.len(), lo.roots.len());
        for (a, b) in hi.roots.iter().zip(lo.roots.iter().rev()) {
            prop_assert!((a - (1.0 - b)).abs() < 1e-7, "{a} vs 1 - {b}");
        }
    }

    #[test]
    fn ordering_matches_region(v in 0.51f64..0.999, rho in 0.05f64..0.95, n in 1.0f64..40.0,
                               u in 0.001f64..0.999) {
        let q = PelcovQuery::new(v, params(rho, n)).unwrap();
        let s = pl::solve(&q);
        let (a, b) = s.covar_below_var_region;
        let near_root = s.roots.iter().any(|r| (r - u).abs() < 1e-6);
        if near_root {
            return Ok(());
        }
        let ord = pl::classify(u, &q).unwrap();
        let inside = u > a && u < b;
        prop_assert_eq!(ord == Ordering::CovarBelow, inside, "u = {}, region ({}, {})", u, a, b);
    }

    #[test]
    fn covar_level_inverts_h(u in 0.001f64..0.999, v in 0.001f64..0.999,
                             rho in -0.95f64..0.95, n in 1.0f64..50.0) {
        let p = params(rho, n);
        let w = pl::covar_level(u, v, p).unwrap();
        if w > 1e-12 && w < 1.0 - 1e-12 {
            prop_assert!((copula::h(u, w, p).unwrap() - v).abs() < 1e-9);
        }
    }

    #[test]
    fn lambda1_is_odd_and_bounded(x in -40.0f64..40.0) {
        let r = dyncopula::lambda1(x);
        prop_assert!(r.abs() <= 1.0);
        prop_assert!((r + dyncopula::lambda1(-x)).abs() < 1e-15);
        if x.abs() < 15.0 {
            prop_assert!((dyncopula::lambda1_inv(r) - x).abs() < 1e-8 * x.abs().max(1.0));
        }
    }

    #[test]
    fn rho_path_stays_inside(nu0 in -5.0f64..5.0, nu1 in -5.0f64..5.0, nu2 in -5.0f64..5.0,
                             seed in 0u64..1000) {
        let ev = EvolutionParams::new([nu0, nu1, nu2], 5.0, 0.3).unwrap();
        let pairs = pelcov::oracle::sample_t_copula(params(0.5, 5.0), 200, seed).unwrap().pairs;
        let path = dyncopula::rho_path(&ev, &pairs);
        prop_assert!(path.rho.iter().all(|r| r.is_finite() && r.abs() < 1.0));
        prop_assert_eq!(&path, &dyncopula::rho_path(&ev, &pairs));
        let ll = dyncopula::dynamic_loglik(&ev, &pairs);
        prop_assert!(ll.is_finite());
    }

    #[test]
    fn fmt_num_keeps_fifteen_digits(x in -1e6f64..1e6) {
        let back: f64 = fmt_num(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-14 * x.abs().max(1e-300) + 1e-300);
        prop_assert!(!fmt_num(x).contains('e'));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ar_filter_is_consistent(phi in -0.5f64..0.5, alpha in 0.01f64..0.14, beta in 0.5f64..0.85,
                               m in 3.0f64..30.0, seed in 0u64..10_000) {
        let p = ArGarchParams::new(phi, 1e-5, alpha, beta, m).unwrap();
        let r = marginals::simulate_ar_garch(&p, 300, seed).unwrap();
        let a = marginals::filter_ar_garch(&p, &r).unwrap();
        prop_assert_eq!(&a, &marginals::filter_ar_garch(&p, &r).unwrap());

        let x = r.values();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let s2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
        let floor = s2.min(p.omega / (1.0 - p.beta));
        let innov = p.innovation().unwrap();
        let mut ll = 0.0;
        for (t, &xt) in x.iter().enumerate() {
            let sigma = a.cond_sigma[t];
            prop_assert!(sigma * sigma >= floor * (1.0 - 1e-12));
            let z = (xt - a.cond_mean[t]) / sigma;
            prop_assert!((z - a.std_residuals[t]).abs() < 1e-12 * z.abs().max(1.0));
            ll += innov.ln_pdf(z) - sigma.ln();
        }
        prop_assert!((ll - a.loglik).abs() <= 1e-8 * ll.abs().max(1.0));
        prop_assert!((a.aic - (10.0 - 2.0 * a.loglik)).abs() < 1e-9);
    }

    #[test]
    fn ma_filter_is_consistent(theta in -0.5f64..0.5, alpha in 0.01f64..0.14, beta in 0.5f64..0.85,
                               m in 3.0f64..30.0, xi in 0.5f64..2.0, seed in 0u64..10_000) {
        let p = MaGarchSkewParams::new(theta, 1e-5, alpha, beta, SkewTParams::new(m, xi).unwrap()).unwrap();
        let r = marginals::simulate_ma_garch_skew(&p, 300, seed).unwrap();
        let a = marginals::filter_ma_garch_skew(&p, &r).unwrap();
        let x = r.values();
        let innov = p.innovation().unwrap();
        let mut ll = 0.0;
        for t in 0..x.len() {
            let z = (x[t] - a.cond_mean[t]) / a.cond_sigma[t];
            ll += innov.ln_pdf(z) - a.cond_sigma[t].ln();
            if t > 0 {
                let eps_prev = x[t - 1] - a.cond_mean[t - 1];
                prop_assert!((a.cond_mean[t] - theta * eps_prev).abs() < 1e-15);
            }
        }
        prop_assert!((ll - a.loglik).abs() <= 1e-8 * ll.abs().max(1.0));
        let u = marginals::pit(&a, |z| innov.cdf(z));
        prop_assert!(u.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn returns_are_negative_log_ratios(prices in prop::collection::vec(0.5f64..2.0, 3..40)) {
        let d0 = chrono::NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let dates = (0..prices.len()).map(|i| d0 + chrono::Days::new(i as u64)).collect();
        let ps = marginals::PriceSeries::new(dates, prices.clone()).unwrap();
        let r: ReturnSeries = marginals::neg_log_returns(&ps).unwrap();
        prop_assert_eq!(r.len(), prices.len() - 1);
        for (t, &x) in r.values().iter().enumerate() {
            prop_assert!((x + (prices[t + 1] / prices[t]).ln()).abs() < 1e-15);
        }
    }
}
