use std::f64::consts::PI;

use pelcov::copula::{self, CopulaParams};
use pelcov::marginals::ks_uniform;
use pelcov::oracle::{self, GridScanner};
use pelcov::pelcov::{solve, PelcovQuery};
use pelcov::Execution;

fn params(rho: f64, n: f64) -> CopulaParams {
    CopulaParams::new(rho, n).unwrap()
}

#[test]
fn sampling_is_identical_across_execution_modes() {
    let p = params(0.4, 3.0);
    let size = 3 * oracle::STREAM_CHUNK + 17;
    let a = oracle::sample_t_copula_with(p, size, 5, Execution::Sequential).unwrap();
    let b = oracle::sample_t_copula_with(p, size, 5, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    let c = oracle::sample_t_copula_with(p, size, 6, Execution::Sequential).unwrap();
    assert_ne!(a.pairs, c.pairs);
}

#[test]
fn copula_margins_are_uniform() {
    let batch = oracle::sample_t_copula(params(0.6, 4.0), 100_000, 21).unwrap();
    let u: Vec<f64> = batch.pairs.iter().map(|p| p.0).collect();
    let v: Vec<f64> = batch.pairs.iter().map(|p| p.1).collect();
    assert!(ks_uniform(&u).p_value > 0.01);
    assert!(ks_uniform(&v).p_value > 0.01);
}

#[test]
fn kendall_tau_matches_arcsine_law() {
    for (rho, n, seed) in [(0.5, 4.0, 1), (-0.3, 10.0, 2), (0.85, 2.0, 3)] {
        let batch = oracle::sample_t_copula(params(rho, n), 200_000, seed).unwrap();
        let est = oracle::kendall_tau_estimate(&batch.pairs, 20);
        let exact = 2.0 / PI * f64::asin(rho);
        assert!(
            (est.value - exact).abs() <= 3.0 * est.std_error,
            "rho {rho}: {} +- {} vs {exact}",
            est.value,
            est.std_error
        );
    }
}

#[test]
fn empirical_h_matches_closed_form() {
    let p = params(0.4, 2.0);
    let batch = oracle::sample_t_copula(p, 2_000_000, 8).unwrap();
    let est = oracle::empirical_h(&batch, 0.3, 0.9, oracle::DEFAULT_WINDOW).unwrap();
    let exact = copula::h(0.3, 0.9, p).unwrap();
    assert!(est.count >= oracle::MIN_WINDOW_POINTS);
    assert!(
        (est.value - exact).abs() <= 3.0 * est.std_error,
        "{} +- {} vs {exact}",
        est.value,
        est.std_error
    );
}

#[test]
fn standard_error_halves_with_four_times_the_data() {
    let p = params(0.4, 2.0);
    let small = oracle::sample_t_copula(p, 500_000, 31).unwrap();
    let large = oracle::sample_t_copula(p, 2_000_000, 31).unwrap();
    let a = oracle::empirical_h(&small, 0.3, 0.9, oracle::DEFAULT_WINDOW).unwrap();
    let b = oracle::empirical_h(&large, 0.3, 0.9, oracle::DEFAULT_WINDOW).unwrap();
    let ratio = a.std_error / b.std_error;
    assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
}

#[test]
fn sparse_window_is_rejected() {
    let batch = oracle::sample_t_copula(params(0.4, 2.0), 1_000, 1).unwrap();
    assert!(oracle::empirical_h(&batch, 0.3, 0.9, 1e-4).is_err());
}

#[test]
fn joint_tail_frequency_matches_copula_cdf() {
    // P(U <= q, V <= q) / q against C(q, q) / q, which lies above the limit λ.
    let (rho, n, q) = (0.5, 4.0, 0.01);
    let p = params(rho, n);
    let size = 10_000_000;
    let batch = oracle::sample_t_copula(p, size, 77).unwrap();
    let hits = batch
        .pairs
        .iter()
        .filter(|&&(u, v)| u <= q && v <= q)
        .count();
    let joint = hits as f64 / size as f64;
    let se = (joint * (1.0 - joint) / size as f64).sqrt();
    let exact = copula::copula_cdf(q, q, p).unwrap();
    assert!(
        (joint - exact).abs() <= 3.0 * se,
        "{joint} +- {se} vs {exact}"
    );
    let lambda = copula::tail_dependence(p);
    assert!(exact / q > lambda);
    assert!(joint / q > lambda - 3.0 * se / q);
}

#[test]
fn grid_scan_agrees_with_closed_form() {
    for (v, rho, n) in [
        (0.99, 0.2, 3.0),
        (0.95, 0.7, 9.7595),
        (0.9, 0.05, 1.5),
        (0.99, 0.9, 4.0),
    ] {
        let p = params(rho, n);
        let s = solve(&PelcovQuery::new(v, p).unwrap());
        let grid = oracle::grid_roots(v, p, 200_000).unwrap();
        assert_eq!(
            grid.len(),
            s.roots.len(),
            "v {v} rho {rho} n {n}: {grid:?} vs {:?}",
            s.roots
        );
        assert_eq!(grid.len(), 1 + usize::from(v > copula::lower_limit(p)));
        for (g, r) in grid.iter().zip(&s.roots) {
            assert!((g - r).abs() < 1e-8, "{g} vs {r}");
        }
        assert!(s.principal > 0.5 && s.principal < s.v_star);
    }
}

#[test]
fn grid_scanner_is_reusable_and_mode_independent() {
    let seq = GridScanner::new(3.0, 50_000, Execution::Sequential).unwrap();
    let par = GridScanner::new(3.0, 50_000, Execution::Parallel).unwrap();
    assert_eq!(seq.len(), 50_000);
    for (v, rho) in [(0.99, 0.2), (0.7, 0.5), (0.3, 0.5)] {
        assert_eq!(seq.roots(v, rho).unwrap(), par.roots(v, rho).unwrap());
    }
    assert!(GridScanner::new(3.0, 100, Execution::Sequential).is_err());
}

#[test]
fn dynamic_simulation_reproduces_its_path() {
    let ev = pelcov::dyncopula::EvolutionParams::new([0.4, 1.2, 0.25], 6.0, 0.55).unwrap();
    let (pairs, rhos) = oracle::simulate_dynamic_copula(&ev, 500, 3);
    let path = pelcov::dyncopula::rho_path(&ev, &pairs);
    for (a, b) in path.rho.iter().zip(&rhos) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    assert_eq!(oracle::simulate_dynamic_copula(&ev, 500, 3).0, pairs);
}
