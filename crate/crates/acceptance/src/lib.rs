//! Acceptance criteria for the `pelcov` crate, each evaluated at its stated
//! tolerance and runtime budget.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use pelcov::copula::{self, ConditionalCdf, CopulaParams};
use pelcov::dyncopula::{self, EvolutionParams};
use pelcov::exec::Execution;
use pelcov::marginals::{self, ArGarchParams, FilteredState, MaGarchSkewParams, ReturnSeries};
use pelcov::monitor::{self, MissingPolicy, MonitorConfig, Report};
use pelcov::oracle::{self, GridScanner};
use pelcov::pelcov::{solve, v_star, v_star_complement, PelcovQuery};
use pelcov::quad::{self, Tolerance};
use pelcov::tdist::{t_cdf, t_quantile, SkewTParams};

pub const V_GRID: [f64; 5] = [0.05, 0.25, 0.5, 0.95, 0.99];
pub const RHO_GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const N_GRID: [f64; 4] = [1.5, 2.0, 9.7595, 30.0];
pub const SCAN_SIZE: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn params(rho: f64, n: f64) -> CopulaParams {
    CopulaParams::new(rho, n).expect("grid parameters are valid")
}

/// Closed-form and scanned roots for one grid point.
#[derive(Debug, Clone)]
pub struct GridCase {
    pub v: f64,
    pub rho: f64,
    pub n: f64,
    pub closed_form: Vec<f64>,
    pub scanned: Vec<f64>,
}

/// Shared state: the grid comparison feeds criteria 1 and 3, and the
/// fixture run feeds 10 and 11.
#[derive(Default)]
pub struct Context {
    grid: Option<Vec<GridCase>>,
    report: Option<Result<Report, String>>,
}

impl Context {
    pub fn grid(&mut self) -> &[GridCase] {
        self.grid.get_or_insert_with(|| {
            let mut out = Vec::new();
            for &n in &N_GRID {
                let scanner = GridScanner::new(n, SCAN_SIZE, Execution::default()).unwrap();
                for &rho in &RHO_GRID {
                    for &v in &V_GRID {
                        let q = PelcovQuery::new(v, params(rho, n)).unwrap();
                        out.push(GridCase {
                            v,
                            rho,
                            n,
                            closed_form: solve(&q).roots,
                            scanned: scanner.roots(v, rho).unwrap(),
                        });
                    }
                }
            }
            out
        })
    }

    pub fn report(&mut self) -> Result<&Report, &str> {
        self.report
            .get_or_insert_with(|| {
                let mut cfg = MonitorConfig::new(fixture("EXUSEU.csv"), fixture("EXUSUK.csv"));
                cfg.v_levels = vec![0.99];
                monitor::run(&cfg).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(String::as_str)
    }
}

fn timed(
    id: u32,
    title: &'static str,
    budget: Option<Duration>,
    f: impl FnOnce() -> (bool, String),
) -> Outcome {
    let start = Instant::now();
    let (mut passed, mut detail) = f();
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            passed = false;
            detail = format!("{detail}; runtime {elapsed:.1?} exceeds {b:?}");
        }
    }
    Outcome {
        id,
        title,
        passed,
        detail,
        elapsed,
    }
}

pub fn criterion_1(ctx: &mut Context) -> Outcome {
    timed(
        1,
        "closed form vs brute-force grid roots",
        Some(Duration::from_secs(60)),
        || {
            let grid = ctx.grid();
            let mut count_mismatch = 0;
            let mut worst: f64 = 0.0;
            for c in grid {
                if c.closed_form.len() != c.scanned.len() {
                    count_mismatch += 1;
                    continue;
                }
                for (a, b) in c.closed_form.iter().zip(&c.scanned) {
                    worst = worst.max((a - b).abs());
                }
            }
            (
                count_mismatch == 0 && worst <= 1e-5,
                format!(
                    "{} cases, {count_mismatch} count mismatches, max |du| = {worst:.2e}",
                    grid.len()
                ),
            )
        },
    )
}

pub fn criterion_2() -> Outcome {
    timed(2, "v = 1/2 has the single root 1/2", None, || {
        let mut worst: f64 = 0.0;
        let mut bad = 0;
        for &n in &N_GRID {
            for &rho in &RHO_GRID {
                let p = params(rho, n);
                let s = solve(&PelcovQuery::new(0.5, p).unwrap());
                if s.roots != [0.5] {
                    bad += 1;
                }
                worst = worst.max((copula::h(0.5, 0.5, p).unwrap() - 0.5).abs());
            }
        }
        (
            bad == 0 && worst <= 1e-12,
            format!("{bad} non-singleton solutions, max residual {worst:.2e}"),
        )
    })
}

pub fn criterion_3(ctx: &mut Context) -> Outcome {
    timed(3, "second root exists iff v > L0", None, || {
        let mut checked = 0;
        let mut mismatches = 0;
        for c in ctx.grid().iter().filter(|c| c.v > 0.5) {
            let l0 = copula::lower_limit(params(c.rho, c.n));
            let predicate = c.v > l0;
            checked += 1;
            if (c.scanned.len() == 2) != predicate || (c.closed_form.len() == 2) != predicate {
                mismatches += 1;
            }
        }
        (
            mismatches == 0,
            format!("{checked} cases with v > 1/2, {mismatches} mismatches"),
        )
    })
}

pub fn criterion_4() -> Outcome {
    timed(4, "h(v*) = 1/2 and h(1/2) > v", None, || {
        // v* is carried as its upper tail 1 - v*: for small rho and large n
        // it lies within 1e-10 of 1, where rounding v* itself to f64
        // perturbs h(v*) by more than the tolerance.
        let mut worst: f64 = 0.0;
        let mut worst_rounded: f64 = 0.0;
        let mut order_fail = 0;
        let mut count = 0;
        for &n in &N_GRID {
            for &rho in &RHO_GRID {
                for &v in V_GRID.iter().filter(|&&v| v > 0.5) {
                    let p = params(rho, n);
                    let q = PelcovQuery::new(v, p).unwrap();
                    let cond = ConditionalCdf::new(v, p).unwrap();
                    worst = worst.max((cond.eval_upper(v_star_complement(&q)) - 0.5).abs());
                    let vs = v_star(&q);
                    if vs < 1.0 {
                        worst_rounded =
                            worst_rounded.max((copula::h(vs, v, p).unwrap() - 0.5).abs());
                    }
                    if copula::h(0.5, v, p).unwrap() <= v {
                        order_fail += 1;
                    }
                    count += 1;
                }
            }
        }
        (
            worst <= 1e-10 && order_fail == 0,
            format!(
                "{count} cases, max |h(v*) - 1/2| = {worst:.2e} \
                 ({worst_rounded:.2e} with v* rounded to f64), {order_fail} with h(1/2) <= v"
            ),
        )
    })
}

pub fn criterion_5() -> Outcome {
    timed(
        5,
        "h is not monotone in u at rho = 0.4, n = 2",
        None,
        || {
            let p = params(0.4, 2.0);
            let (mut above, mut below) = (None, None);
            for i in 1..1000 {
                let v = i as f64 / 1000.0;
                let lo = copula::h(0.55, v, p).unwrap();
                let hi = copula::h(0.95, v, p).unwrap();
                if hi > lo && above.is_none() {
                    above = Some(v);
                }
                if hi < lo && below.is_none() {
                    below = Some(v);
                }
            }
            (
                above.is_some() && below.is_some(),
                format!("h(0.95,v) > h(0.55,v) first at v = {above:?}; reverse at v = {below:?}"),
            )
        },
    )
}

pub fn criterion_6() -> Outcome {
    timed(6, "tail dependence vs C(u,u)/u at u = 1e-6", None, || {
        let u = 1e-6;
        let mut parts = Vec::new();
        let mut ok = true;
        for rho in [0.3, 0.6] {
            for n in [3.0, 8.0] {
                let p = params(rho, n);
                let lambda = copula::tail_dependence(p);
                let ratio = copula::copula_cdf(u, u, p).unwrap() / u;
                let gap = (ratio - lambda).abs();
                ok &= gap <= 1e-3;
                parts.push(format!("({rho},{n}): {gap:.2e}"));
            }
        }
        (ok, format!("|C(u,u)/u - lambda| {}", parts.join(", ")))
    })
}

fn fixture_returns() -> (ReturnSeries, ReturnSeries) {
    let load = |name| {
        let p = monitor::load_fred_csv(fixture(name), MissingPolicy::Reject).unwrap();
        marginals::neg_log_returns(&p.series).unwrap()
    };
    (load("EXUSEU.csv"), load("EXUSUK.csv"))
}

pub fn criterion_7() -> Outcome {
    timed(
        7,
        "fixture descriptive statistics",
        Some(Duration::from_secs(5)),
        || {
            let (x, y) = fixture_returns();
            let r = marginals::pearson(x.values(), y.values());
            let sd = marginals::descriptive_stats(x.values()).unwrap().std;
            (
                x.len() == 303
                    && y.len() == 303
                    && (r - 0.6822).abs() <= 0.005
                    && (sd - 0.022035).abs() <= 0.0005,
                format!(
                    "n_obs = {}/{}, pearson = {r:.5}, EXUSEU std = {sd:.6}",
                    x.len(),
                    y.len()
                ),
            )
        },
    )
}

fn fixture_fits() -> (
    ArGarchParams,
    FilteredState,
    MaGarchSkewParams,
    FilteredState,
) {
    let (x, y) = fixture_returns();
    let (px, sx) = marginals::fit_ar_garch(&x).unwrap();
    let (py, sy) = marginals::fit_ma_garch_skew(&y).unwrap();
    (px, sx, py, sy)
}

pub fn criterion_8() -> Outcome {
    timed(
        8,
        "marginal fits on the fixture",
        Some(Duration::from_secs(60)),
        || {
            let (px, _, py, _) = fixture_fits();
            let ok = (py.theta1 - 0.2299).abs() <= 0.06
                && (px.beta - 0.9035).abs() <= 0.10
                && (py.skew.xi - 1.298).abs() <= 0.15;
            (
                ok,
                format!(
                    "theta1 = {:.4}, beta_x = {:.4}, xi = {:.4}",
                    py.theta1, px.beta, py.skew.xi
                ),
            )
        },
    )
}

pub fn criterion_9() -> Outcome {
    timed(9, "static copula fit on the fixture", None, || {
        let (px, sx, py, sy) = fixture_fits();
        let ix = px.innovation().unwrap();
        let iy = py.innovation().unwrap();
        let u = marginals::pit(&sx, |z| ix.cdf(z));
        let v = marginals::pit(&sy, |z| iy.cdf(z));
        let pairs: Vec<(f64, f64)> = u.into_iter().zip(v).collect();
        match dyncopula::static_fit(&pairs) {
            Ok(f) => (
                (7.0..=13.0).contains(&f.params.n()),
                format!("n = {:.4}, rho = {:.4}", f.params.n(), f.params.rho()),
            ),
            Err(e) => (false, e.to_string()),
        }
    })
}

pub fn criterion_10(ctx: &mut Context) -> Outcome {
    timed(
        10,
        "dynamic run at v = 0.99: min L0 > 0.99, unique roots",
        Some(Duration::from_secs(300)),
        || match ctx.report() {
            Ok(r) => {
                let single = r.rows.iter().all(|row| row.levels[0].root_count == 1);
                let min_l0 = r.summary.min_l0;
                (
                    min_l0 > 0.99 && single,
                    format!(
                        "min L0 = {min_l0:.5}, all {} dates single root: {single}",
                        r.rows.len()
                    ),
                )
            }
            Err(e) => (false, e.to_string()),
        },
    )
}

pub fn criterion_11(ctx: &mut Context) -> Outcome {
    timed(
        11,
        "PELCoV range at v = 0.99 on the fixture",
        None,
        || match ctx.report() {
            Ok(r) => {
                let l = &r.summary.levels[0];
                (
                    (l.u_min - 0.678).abs() <= 0.03 && (l.u_max - 0.757).abs() <= 0.03,
                    format!(
                        "u range [{:.4}, {:.4}], target [0.678, 0.757] +/- 0.03",
                        l.u_min, l.u_max
                    ),
                )
            }
            Err(e) => (false, e.to_string()),
        },
    )
}

fn wald_covers(est: &[f64], se: &[f64], truth: &[f64]) -> bool {
    est.iter()
        .zip(se)
        .zip(truth)
        .all(|((e, s), t)| s.is_finite() && (e - t).abs() <= 1.959_963_984_540_054 * s)
}

pub const AR_TRUTH: [f64; 5] = [0.03, 1e-5, 0.07, 0.90, 8.0];
pub const MA_TRUTH: [f64; 6] = [0.23, 1e-5, 0.07, 0.90, 8.0, 1.3];
pub const NU_TRUTH: [f64; 3] = [0.4, 1.2, 0.25];
pub const NU_DF: f64 = 6.0;
pub const NU_RHO_INIT: f64 = 0.55;

/// Replications (out of 20) whose 95% Wald intervals cover every true
/// parameter, for the AR-GARCH-t, MA-GARCH-skew-t and dynamic copula models.
pub fn recovery_counts() -> [usize; 3] {
    let t = AR_TRUTH;
    let ar = ArGarchParams::new(t[0], t[1], t[2], t[3], t[4]).unwrap();
    let m = MA_TRUTH;
    let ma =
        MaGarchSkewParams::new(m[0], m[1], m[2], m[3], SkewTParams { m: m[4], xi: m[5] }).unwrap();
    let ev = EvolutionParams::new(NU_TRUTH, NU_DF, NU_RHO_INIT).unwrap();
    let mut counts = [0; 3];
    for rep in 0..20u64 {
        let r = marginals::simulate_ar_garch(&ar, 5000, 1000 + rep).unwrap();
        if let Ok((p, s)) = marginals::fit_ar_garch(&r) {
            counts[0] += usize::from(wald_covers(&p.to_vec(), &s.std_errors, &AR_TRUTH));
        }
        let r = marginals::simulate_ma_garch_skew(&ma, 5000, 2000 + rep).unwrap();
        if let Ok((p, s)) = marginals::fit_ma_garch_skew(&r) {
            counts[1] += usize::from(wald_covers(&p.to_vec(), &s.std_errors, &MA_TRUTH));
        }
        let (pairs, _) = oracle::simulate_dynamic_copula(&ev, 2000, 3000 + rep);
        if let Ok(f) = dyncopula::fit_dynamic(&pairs, ev.n, NU_RHO_INIT) {
            counts[2] += usize::from(wald_covers(&f.params.nu(), &f.std_errors, &NU_TRUTH));
        }
    }
    counts
}

pub fn criterion_12() -> Outcome {
    timed(12, "property suite", Some(Duration::from_secs(600)), || {
        let mut notes = Vec::new();
        let mut ok = true;

        let mut worst_rt: f64 = 0.0;
        for &n in &[1.5, 2.0, 5.0, 9.7595, 30.0] {
            for i in 1..=999 {
                let p = i as f64 / 1000.0;
                let q = t_quantile(p, n).unwrap();
                worst_rt = worst_rt.max((t_cdf(q, n).unwrap() - p).abs());
            }
        }
        ok &= worst_rt <= 1e-10;
        notes.push(format!("roundtrip {worst_rt:.1e}"));

        let mut order_fail = 0;
        for i in 1..100 {
            let v = i as f64 / 100.0;
            for &n in &[1.5, 2.0, 3.0, 5.0, 9.7595, 30.0] {
                let (qn, qn1) = (t_quantile(v, n).unwrap(), t_quantile(v, n + 1.0).unwrap());
                let holds = if v < 0.5 { qn <= qn1 } else { qn1 <= qn };
                order_fail += usize::from(!holds);
            }
        }
        ok &= order_fail == 0;
        notes.push(format!("quantile ordering failures {order_fail}"));

        let mut worst_int: f64 = 0.0;
        let tol = Tolerance {
            abs: 1e-14,
            rel: 1e-12,
        };
        for &v in &V_GRID {
            for &rho in &RHO_GRID {
                for &n in &N_GRID {
                    let cond = ConditionalCdf::new(v, params(rho, n)).unwrap();
                    let t_n = *cond.t_n();
                    let integral =
                        quad::integrate_real_line(|a| cond.at_score(a) * t_n.pdf(a), tol).value;
                    worst_int = worst_int.max((integral - v).abs());
                }
            }
        }
        ok &= worst_int <= 1e-8;
        notes.push(format!("|int h du - v| {worst_int:.1e}"));

        let counts = recovery_counts();
        ok &= counts.iter().all(|&c| c >= 18);
        notes.push(format!(
            "Wald coverage ar-garch {}/20, ma-garch-skew {}/20, nu {}/20",
            counts[0], counts[1], counts[2]
        ));

        let deterministic = csv_is_deterministic();
        ok &= deterministic;
        notes.push(format!("csv byte-identical {deterministic}"));

        (ok, notes.join("; "))
    })
}

fn csv_is_deterministic() -> bool {
    let dir = std::env::temp_dir().join(format!("pelcov-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let run = |name: &str| {
        let mut cfg = MonitorConfig::new(fixture("EXUSEU.csv"), fixture("EXUSUK.csv"));
        let out = dir.join(name);
        cfg.output_path = Some(out.clone());
        let report = monitor::run(&cfg).ok()?;
        monitor::emit_csv(&report, &out).ok()?;
        std::fs::read(&out).ok()
    };
    let same = match (run("a.csv"), run("b.csv")) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    };
    let _ = std::fs::remove_dir_all(&dir);
    same
}

/// Runs every criterion in order.
pub fn run_all() -> Vec<Outcome> {
    let mut ctx = Context::default();
    vec![
        criterion_1(&mut ctx),
        criterion_2(),
        criterion_3(&mut ctx),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(&mut ctx),
        criterion_11(&mut ctx),
        criterion_12(),
    ]
}
