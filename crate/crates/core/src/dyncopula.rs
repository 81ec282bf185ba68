//! Static and time-varying Student-t copula estimation.
//!
//! The dynamic model lets the correlation follow
//!
//! ```text
//! ρ_t = Λ₁(ν₀ + ν₁ ρ_{t−1} + ν₂ · mean_{j=1..10} t_n⁻¹(u_{t−j}) t_n⁻¹(v_{t−j}))
//! ```
//!
//! with `Λ₁(x) = (1 − e^{−x}) / (1 + e^{−x})`, `ρ₀ = rho_init` and the lag
//! mean taken over the lags available so far (zero when there are none).
//! The degrees of freedom stay fixed at the static estimate.

use crate::copula::{self, CopulaParams, TCopulaDensity};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::optim::{self, BfgsOptions};
use crate::tdist::{DegreesOfFreedom, StudentT};

/// Number of lagged score products averaged in the recursion.
pub const LAG_WINDOW: usize = 10;

/// `|ρ_t|` is kept at or below this. `Λ₁` itself rounds to `±1` for
/// `|x| > 37`.
pub const RHO_BOUND: f64 = 1.0 - 1e-12;

/// Minimum number of pairs for a static fit.
pub const MIN_PAIRS: usize = 50;

/// Modified logistic transform onto `(−1, 1)`.
pub fn lambda1(x: f64) -> f64 {
    (0.5 * x).tanh()
}

/// Inverse of [`lambda1`].
pub fn lambda1_inv(r: f64) -> f64 {
    2.0 * r.atanh()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionParams {
    pub nu0: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub n: DegreesOfFreedom,
    pub rho_init: f64,
}

impl EvolutionParams {
    pub fn new(nu: [f64; 3], n: f64, rho_init: f64) -> Result<Self> {
        if nu.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "evolution coefficients must be finite: {nu:?}"
            )));
        }
        if !(rho_init.is_finite() && rho_init.abs() < 1.0) {
            return Err(Error::domain(format!(
                "rho_init must lie in (-1, 1), got {rho_init}"
            )));
        }
        Ok(Self {
            nu0: nu[0],
            nu1: nu[1],
            nu2: nu[2],
            n: DegreesOfFreedom::new(n)?,
            rho_init,
        })
    }

    pub fn nu(&self) -> [f64; 3] {
        [self.nu0, self.nu1, self.nu2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoPath {
    pub rho: Vec<f64>,
    /// `L0_t`, the lower boundary limit of `h` under `(ρ_t, n)`.
    pub l0: Vec<f64>,
}

impl RhoPath {
    pub fn min_l0(&self) -> f64 {
        self.l0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_pairs(pairs: &[(f64, f64)], min: usize) -> Result<()> {
    if pairs.len() < min {
        return Err(Error::InsufficientData(format!(
            "need at least {min} pseudo-observation pairs, got {}",
            pairs.len()
        )));
    }
    if let Some(i) = pairs
        .iter()
        .position(|&(u, v)| !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0))
    {
        return Err(Error::domain(format!(
            "pseudo-observation {i} is not inside the open unit square: {:?}",
            pairs[i]
        )));
    }
    Ok(())
}

fn scores(t: &StudentT, pairs: &[(f64, f64)], exec: Execution) -> Vec<(f64, f64)> {
    exec::map_slice(exec, pairs, |&(u, v)| (t.quantile(u), t.quantile(v)))
}

/// Correlation path from precomputed score pairs.
fn rho_recursion(nu: [f64; 3], rho_init: f64, scores: &[(f64, f64)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(scores.len());
    let mut prev = rho_init;
    let mut window_sum = 0.0;
    for t in 0..scores.len() {
        // Lags t-1 ..= t-LAG_WINDOW (0-based) that exist.
        if t > 0 {
            window_sum += scores[t - 1].0 * scores[t - 1].1;
        }
        if t > LAG_WINDOW {
            let old = scores[t - 1 - LAG_WINDOW];
            window_sum -= old.0 * old.1;
        }
        let count = t.min(LAG_WINDOW);
        let lag_mean = if count == 0 {
            0.0
        } else {
            window_sum / count as f64
        };
        let rho = lambda1(nu[0] + nu[1] * prev + nu[2] * lag_mean).clamp(-RHO_BOUND, RHO_BOUND);
        out.push(rho);
        prev = rho;
    }
    out
}

/// Evaluates the correlation recursion and the per-date `L0_t`.
///
/// Pseudo-observations are expected strictly inside `(0, 1)²`.
pub fn rho_path(ev: &EvolutionParams, pseudo_obs: &[(f64, f64)]) -> RhoPath {
    let n = ev.n.value();
    let t = StudentT::new(n).expect("n > 1");
    let sc = scores(&t, pseudo_obs, Execution::Sequential);
    let rho = rho_recursion(ev.nu(), ev.rho_init, &sc);
    let l0 = rho
        .iter()
        .map(|&r| copula::lower_limit(CopulaParams::new(r, n).expect("|rho| < 1")))
        .collect();
    RhoPath { rho, l0 }
}

/// Copula log-likelihood of the dynamic model.
pub fn dynamic_loglik(ev: &EvolutionParams, pseudo_obs: &[(f64, f64)]) -> f64 {
    let dens = TCopulaDensity::new(ev.n.value()).expect("n > 1");
    let sc = scores(dens.t_n(), pseudo_obs, Execution::Sequential);
    dynamic_loglik_scores(&dens, ev.nu(), ev.rho_init, &sc)
}

fn dynamic_loglik_scores(
    dens: &TCopulaDensity,
    nu: [f64; 3],
    rho_init: f64,
    sc: &[(f64, f64)],
) -> f64 {
    rho_recursion(nu, rho_init, sc)
        .iter()
        .zip(sc)
        .map(|(&r, &(a, b))| dens.ln_density(a, b, r))
        .sum()
}

/// Copula log-likelihood at constant parameters.
pub fn static_loglik(params: CopulaParams, pseudo_obs: &[(f64, f64)]) -> f64 {
    let dens = TCopulaDensity::new(params.n()).expect("n > 1");
    scores(dens.t_n(), pseudo_obs, Execution::Sequential)
        .iter()
        .map(|&(a, b)| dens.ln_density(a, b, params.rho()))
        .sum()
}

#[derive(Debug, Clone)]
pub struct StaticFit {
    pub params: CopulaParams,
    pub loglik: f64,
    /// Standard errors of `(ρ, n)`.
    pub std_errors: [f64; 2],
}

/// Degrees-of-freedom search range of the static fit.
pub const STATIC_DF_RANGE: (f64, f64) = (1.2, 200.0);
const DF_GRID: usize = 28;
/// `|ρ̂|` above this is reported as a boundary solution.
const RHO_EDGE: f64 = 0.9995;
const Z_MAX: f64 = 5.3;

/// Maximum pseudo-likelihood over `(ρ, n)` by profiling: for each `n` the
/// log-likelihood is maximised over `ρ` with Brent's method; `n` is located
/// on a log-spaced grid and refined with Brent on `ln n`.
///
/// An estimate at `|ρ̂| → 1` or at the lower end of the degrees-of-freedom
/// range is a [`Error::Boundary`]. Estimates at the upper end are capped
/// there.
pub fn static_fit(pseudo_obs: &[(f64, f64)]) -> Result<StaticFit> {
    static_fit_with(pseudo_obs, Execution::default())
}

pub fn static_fit_with(pseudo_obs: &[(f64, f64)], exec: Execution) -> Result<StaticFit> {
    check_pairs(pseudo_obs, MIN_PAIRS)?;
    let profile = |ln_n: f64| -> (f64, f64) {
        let dens = TCopulaDensity::new(ln_n.exp()).expect("n > 1");
        let sc = scores(dens.t_n(), pseudo_obs, Execution::Sequential);
        let neg = |z: f64| -> f64 {
            let r = z.tanh();
            -sc.iter()
                .map(|&(a, b)| dens.ln_density(a, b, r))
                .sum::<f64>()
        };
        let (z, f) = optim::brent_min(neg, -Z_MAX, Z_MAX, 1e-10);
        (z.tanh(), -f)
    };

    let (lo, hi) = (STATIC_DF_RANGE.0.ln(), STATIC_DF_RANGE.1.ln());
    let grid: Vec<f64> = (0..DF_GRID)
        .map(|i| lo + (hi - lo) * i as f64 / (DF_GRID - 1) as f64)
        .collect();
    let values = exec::map_slice(exec, &grid, |&g| profile(g).1);
    let best = (0..DF_GRID).fold(0, |b, i| if values[i] > values[b] { i } else { b });
    if best == 0 {
        return Err(Error::Boundary(format!(
            "degrees of freedom at the lower end of the search range ({})",
            STATIC_DF_RANGE.0
        )));
    }
    let right = (best + 1).min(DF_GRID - 1);
    let (ln_n, _) = optim::brent_min(|g| -profile(g).1, grid[best - 1], grid[right], 1e-9);
    let (rho, loglik) = profile(ln_n);
    if rho.abs() > RHO_EDGE {
        return Err(Error::Boundary(format!(
            "correlation estimate {rho} is at the edge of (-1, 1)"
        )));
    }
    let n = ln_n.exp();
    let params = CopulaParams::new(rho, n)?;

    let neg_ll = |th: &[f64]| -> f64 {
        match CopulaParams::new(th[0].tanh(), th[1].exp()) {
            Ok(p) => -static_loglik(p, pseudo_obs),
            Err(_) => f64::INFINITY,
        }
    };
    let se = optim::delta_method_se(
        &neg_ll,
        &[rho.atanh(), ln_n],
        &|th| vec![th[0].tanh(), th[1].exp()],
        1e-4,
    );
    Ok(StaticFit {
        params,
        loglik,
        std_errors: [se[0], se[1]],
    })
}

#[derive(Debug, Clone)]
pub struct DynamicFit {
    pub params: EvolutionParams,
    pub loglik: f64,
    /// Standard errors of `(ν₀, ν₁, ν₂)`.
    pub std_errors: [f64; 3],
    pub path: RhoPath,
    /// Final log-likelihood of each start, in start order.
    pub start_logliks: Vec<f64>,
}

/// Two-stage maximum likelihood for `(ν₀, ν₁, ν₂)` at fixed `n`.
///
/// Eight deterministic starts: four structured ones that reproduce the
/// constant correlation `rho_init` at `ν₂ = 0` or at the sample mean of the
/// score products, and four seeded perturbations of the second.
pub fn fit_dynamic(
    pseudo_obs: &[(f64, f64)],
    n: DegreesOfFreedom,
    rho_init: f64,
) -> Result<DynamicFit> {
    fit_dynamic_with(pseudo_obs, n, rho_init, Execution::default())
}

pub fn fit_dynamic_with(
    pseudo_obs: &[(f64, f64)],
    n: DegreesOfFreedom,
    rho_init: f64,
    exec: Execution,
) -> Result<DynamicFit> {
    check_pairs(pseudo_obs, MIN_PAIRS)?;
    if !(rho_init.is_finite() && rho_init.abs() < 1.0) {
        return Err(Error::domain(format!(
            "rho_init must lie in (-1, 1), got {rho_init}"
        )));
    }
    let dens = TCopulaDensity::new(n.value())?;
    let sc = scores(dens.t_n(), pseudo_obs, exec);
    let len = sc.len() as f64;
    let neg_ll = |nu: &[f64]| -dynamic_loglik_scores(&dens, [nu[0], nu[1], nu[2]], rho_init, &sc);
    let objective = |nu: &[f64]| neg_ll(nu) / len;

    let r = rho_init;
    let c = lambda1_inv(r.clamp(-0.99, 0.99));
    let mean_product = sc.iter().map(|&(a, b)| a * b).sum::<f64>() / len;
    let mut starts = vec![
        vec![c, 0.0, 0.0],
        vec![c - 1.5 * r, 1.5, 0.0],
        vec![c - r - 0.3 * mean_product, 1.0, 0.3],
        vec![c - 0.5 * mean_product, 0.0, 0.5],
    ];
    starts.extend(
        optim::jittered_starts(&starts[1], &[0.5, 0.8, 0.3], 5, 0x6479_6e61)
            .into_iter()
            .skip(1),
    );
    let opts = BfgsOptions::default();
    let (best, runs) = optim::multistart(objective, &starts, &opts, exec);
    let start_logliks: Vec<f64> = runs.iter().map(|m| -m.fx * len).collect();
    let Some(best) = best.filter(|b| b.converged) else {
        let fallback = runs
            .iter()
            .filter(|m| m.fx.is_finite())
            .min_by(|a, b| a.fx.total_cmp(&b.fx));
        return Err(Error::Fit {
            message: format!("dynamic copula: no converged start; loglik trace {start_logliks:?}"),
            best_loglik: fallback.map_or(f64::NEG_INFINITY, |m| -m.fx * len),
            best_params: fallback.map_or_else(Vec::new, |m| m.x.clone()),
        });
    };
    let params = EvolutionParams::new([best.x[0], best.x[1], best.x[2]], n.value(), rho_init)?;
    let se = optim::delta_method_se(&neg_ll, &best.x, &|th| th.to_vec(), 1e-4);
    Ok(DynamicFit {
        params,
        loglik: -neg_ll(&best.x),
        std_errors: [se[0], se[1], se[2]],
        path: rho_path(&params, pseudo_obs),
        start_logliks,
    })
}
