//! Marginal models for the two return series.
//!
//! * `X`: AR(1) mean, GARCH(1,1) variance, unit-variance Student-t
//!   innovations.
//! * `Y`: MA(1) mean, GARCH(1,1) variance, standardized Fernández–Steel
//!   skew-t innovations.
//!
//! Both filters start from `x₀ = 0`, `ε₀ = 0` and `σ₀²` equal to the sample
//! variance. Parameters are estimated by exact conditional maximum
//! likelihood with BFGS in an unconstrained parametrisation:
//!
//! | natural       | unconstrained         |
//! |---------------|-----------------------|
//! | `φ₁`, `θ₁`    | `atanh`               |
//! | `ω`           | `ln`                  |
//! | `α + β`       | logit                 |
//! | `α / (α + β)` | logit                 |
//! | `m`           | `ln(m − 2)`           |
//! | `ξ`           | `ln`                  |

pub mod diagnostics;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::optim::{self, BfgsOptions};
use crate::tdist::{SkewT, SkewTParams, UnitVarianceT};

pub use diagnostics::{
    descriptive_stats, jarque_bera, kendall_tau, ks_uniform, ljung_box, pearson, spearman,
    DescriptiveStats, TestResult,
};

/// Minimum series length accepted by the fitting routines.
pub const MIN_FIT_LEN: usize = 50;

/// Probabilities produced by [`pit`] are clamped to `[PIT_EPS, 1 − PIT_EPS]`.
pub const PIT_EPS: f64 = 1e-15;

fn check_dates(dates: &[NaiveDate]) -> Result<()> {
    if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Ingestion(format!(
            "dates must be strictly increasing ({} followed by {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Dated price levels.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Ingestion(format!(
                "{} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        check_dates(&dates)?;
        Ok(Self { dates, values })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Dated negative log-returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Ingestion(format!(
                "{} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Ingestion(format!(
                "non-finite return at {}",
                dates[i]
            )));
        }
        check_dates(&dates)?;
        Ok(Self { dates, values })
    }

    /// Undated series; dates are consecutive month starts from 2000-01.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = (0..values.len())
            .map(|i| start + chrono::Months::new(i as u32))
            .collect();
        Self::new(dates, values)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `r_t = ln(p_{t−1} / p_t)`, dated at `t`.
pub fn neg_log_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 prices, got {}",
            prices.len()
        )));
    }
    if let Some(i) = prices
        .values
        .iter()
        .position(|&p| !(p.is_finite() && p > 0.0))
    {
        return Err(Error::Ingestion(format!(
            "price on {} is not positive: {}",
            prices.dates[i], prices.values[i]
        )));
    }
    let values = prices
        .values
        .windows(2)
        .map(|w| (w[0] / w[1]).ln())
        .collect();
    ReturnSeries::new(prices.dates[1..].to_vec(), values)
}

/// Innovation law of a marginal model, standardized to zero mean and unit
/// variance.
#[derive(Debug, Clone, Copy)]
pub enum Innovation {
    StudentT(UnitVarianceT),
    SkewT(SkewT),
}

impl Innovation {
    pub fn ln_pdf(&self, z: f64) -> f64 {
        match self {
            Innovation::StudentT(d) => d.ln_pdf(z),
            Innovation::SkewT(d) => d.ln_pdf(z),
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            Innovation::StudentT(d) => d.cdf(z),
            Innovation::SkewT(d) => d.cdf(z),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Innovation::StudentT(d) => d.quantile(p),
            Innovation::SkewT(d) => d.quantile(p),
        }
    }
}

fn check_garch(omega: f64, alpha: f64, beta: f64) -> Result<()> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::domain(format!(
            "omega must be positive, got {omega}"
        )));
    }
    if !(alpha >= 0.0 && beta >= 0.0 && alpha + beta < 1.0) {
        return Err(Error::domain(format!(
            "need alpha, beta >= 0 and alpha + beta < 1, got {alpha}, {beta}"
        )));
    }
    Ok(())
}

fn check_coefficient(name: &str, c: f64) -> Result<()> {
    if !(c.is_finite() && c.abs() < 1.0) {
        return Err(Error::domain(format!("|{name}| must be < 1, got {c}")));
    }
    Ok(())
}

/// AR(1)-GARCH(1,1) with unit-variance t innovations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArGarchParams {
    pub phi1: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub m1: f64,
}

impl ArGarchParams {
    pub fn new(phi1: f64, omega: f64, alpha: f64, beta: f64, m1: f64) -> Result<Self> {
        check_coefficient("phi1", phi1)?;
        check_garch(omega, alpha, beta)?;
        UnitVarianceT::new(m1)?;
        Ok(Self {
            phi1,
            omega,
            alpha,
            beta,
            m1,
        })
    }

    pub fn innovation(&self) -> Result<Innovation> {
        Ok(Innovation::StudentT(UnitVarianceT::new(self.m1)?))
    }

    pub const NAMES: [&'static str; 5] = ["phi1", "omega", "alpha", "beta", "m1"];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.phi1, self.omega, self.alpha, self.beta, self.m1]
    }

    fn spec(&self) -> ModelSpec {
        ModelSpec {
            mean: MeanEq::Ar(self.phi1),
            omega: self.omega,
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// MA(1)-GARCH(1,1) with standardized skew-t innovations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaGarchSkewParams {
    pub theta1: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub skew: SkewTParams,
}

impl MaGarchSkewParams {
    pub fn new(theta1: f64, omega: f64, alpha: f64, beta: f64, skew: SkewTParams) -> Result<Self> {
        check_coefficient("theta1", theta1)?;
        check_garch(omega, alpha, beta)?;
        let skew = SkewTParams::new(skew.m, skew.xi)?;
        Ok(Self {
            theta1,
            omega,
            alpha,
            beta,
            skew,
        })
    }

    pub fn innovation(&self) -> Result<Innovation> {
        Ok(Innovation::SkewT(SkewT::new(self.skew, true)?))
    }

    pub const NAMES: [&'static str; 6] = ["theta1", "omega", "alpha", "beta", "m2", "xi"];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.theta1,
            self.omega,
            self.alpha,
            self.beta,
            self.skew.m,
            self.skew.xi,
        ]
    }

    fn spec(&self) -> ModelSpec {
        ModelSpec {
            mean: MeanEq::Ma(self.theta1),
            omega: self.omega,
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// Output of a filter pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredState {
    pub cond_mean: Vec<f64>,
    pub cond_sigma: Vec<f64>,
    pub std_residuals: Vec<f64>,
    pub loglik: f64,
    pub aic: f64,
    /// One entry per natural parameter, in the order of the params'
    /// `NAMES`. Parameters held fixed report `0`; `NaN` marks a Hessian
    /// that was not positive definite.
    pub std_errors: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum MeanEq {
    Ar(f64),
    Ma(f64),
}

#[derive(Debug, Clone, Copy)]
struct ModelSpec {
    mean: MeanEq,
    omega: f64,
    alpha: f64,
    beta: f64,
}

/// Sample variance with `n − 1` denominator.
fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Runs the mean/variance recursion, calling `visit(t, mean_t, sigma2_t)`.
fn recurse(x: &[f64], spec: ModelSpec, sigma0_sq: f64, mut visit: impl FnMut(usize, f64, f64)) {
    let (mut x_prev, mut eps_prev, mut s2_prev) = (0.0, 0.0, sigma0_sq);
    for (t, &xt) in x.iter().enumerate() {
        let mean = match spec.mean {
            MeanEq::Ar(phi) => phi * x_prev,
            MeanEq::Ma(theta) => theta * eps_prev,
        };
        let s2 = spec.omega + spec.alpha * eps_prev * eps_prev + spec.beta * s2_prev;
        visit(t, mean, s2);
        eps_prev = xt - mean;
        x_prev = xt;
        s2_prev = s2;
    }
}

fn loglik(x: &[f64], spec: ModelSpec, innov: &Innovation, sigma0_sq: f64) -> f64 {
    let mut ll = 0.0;
    recurse(x, spec, sigma0_sq, |t, mean, s2| {
        let sigma = s2.sqrt();
        ll += innov.ln_pdf((x[t] - mean) / sigma) - sigma.ln();
    });
    ll
}

fn filter(x: &[f64], spec: ModelSpec, innov: &Innovation, free_params: usize) -> FilteredState {
    let n = x.len();
    let mut cond_mean = Vec::with_capacity(n);
    let mut cond_sigma = Vec::with_capacity(n);
    let mut std_residuals = Vec::with_capacity(n);
    let mut ll = 0.0;
    recurse(x, spec, sample_variance(x), |t, mean, s2| {
        let sigma = s2.sqrt();
        let z = (x[t] - mean) / sigma;
        ll += innov.ln_pdf(z) - sigma.ln();
        cond_mean.push(mean);
        cond_sigma.push(sigma);
        std_residuals.push(z);
    });
    FilteredState {
        cond_mean,
        cond_sigma,
        std_residuals,
        loglik: ll,
        aic: 2.0 * free_params as f64 - 2.0 * ll,
        std_errors: Vec::new(),
    }
}

/// Filters `r` under fixed AR-GARCH parameters. `std_errors` is left empty.
pub fn filter_ar_garch(params: &ArGarchParams, r: &ReturnSeries) -> Result<FilteredState> {
    check_fit_len(r)?;
    Ok(filter(r.values(), params.spec(), &params.innovation()?, 5))
}

/// Filters `r` under fixed MA-GARCH-skew-t parameters. `std_errors` is left
/// empty.
pub fn filter_ma_garch_skew(params: &MaGarchSkewParams, r: &ReturnSeries) -> Result<FilteredState> {
    check_fit_len(r)?;
    Ok(filter(r.values(), params.spec(), &params.innovation()?, 6))
}

fn check_fit_len(r: &ReturnSeries) -> Result<()> {
    if r.len() < MIN_FIT_LEN {
        return Err(Error::InsufficientData(format!(
            "marginal fit needs at least {MIN_FIT_LEN} returns, got {}",
            r.len()
        )));
    }
    if sample_variance(r.values()) <= 0.0 {
        return Err(Error::domain("constant return series"));
    }
    Ok(())
}

/// Knobs of the deterministic multistart protocol.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Hold the innovation degrees of freedom at this value.
    pub fixed_df: Option<f64>,
    /// Hold the skew-t asymmetry `ξ` at this value (MA model only).
    pub fixed_skew: Option<f64>,
    pub starts: usize,
    pub seed: u64,
    pub exec: Execution,
    pub bfgs: BfgsOptions,
    /// Hessian step in the unconstrained space.
    pub hessian_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fixed_df: None,
            fixed_skew: None,
            starts: 8,
            seed: 0x6d61_7267,
            exec: Execution::default(),
            bfgs: BfgsOptions::default(),
            hessian_step: 1e-4,
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    ArT,
    MaSkewT,
}

/// Maps between the unconstrained vector and natural parameters.
struct Transform {
    kind: Kind,
    fixed_df: Option<f64>,
    fixed_skew: Option<f64>,
}

impl Transform {
    fn natural_len(&self) -> usize {
        match self.kind {
            Kind::ArT => 5,
            Kind::MaSkewT => 6,
        }
    }

    fn free_len(&self) -> usize {
        self.natural_len()
            - usize::from(self.fixed_df.is_some())
            - usize::from(self.kind == Kind::MaSkewT && self.fixed_skew.is_some())
    }

    fn to_natural(&self, th: &[f64]) -> Vec<f64> {
        let persistence = logistic(th[2]);
        let share = logistic(th[3]);
        let mut out = vec![
            th[0].tanh(),
            th[1].exp(),
            persistence * share,
            persistence * (1.0 - share),
        ];
        let mut i = 4;
        match self.fixed_df {
            Some(m) => out.push(m),
            None => {
                out.push(2.0 + th[i].exp());
                i += 1;
            }
        }
        if self.kind == Kind::MaSkewT {
            out.push(self.fixed_skew.unwrap_or_else(|| th[i].exp()));
        }
        out
    }

    fn to_free(&self, nat: &[f64]) -> Vec<f64> {
        let persistence = nat[2] + nat[3];
        let mut out = vec![
            nat[0].atanh(),
            nat[1].ln(),
            logit(persistence),
            logit(nat[2] / persistence),
        ];
        if self.fixed_df.is_none() {
            out.push((nat[4] - 2.0).ln());
        }
        if self.kind == Kind::MaSkewT && self.fixed_skew.is_none() {
            out.push(nat[5].ln());
        }
        out
    }

    fn spec(&self, nat: &[f64]) -> ModelSpec {
        ModelSpec {
            mean: match self.kind {
                Kind::ArT => MeanEq::Ar(nat[0]),
                Kind::MaSkewT => MeanEq::Ma(nat[0]),
            },
            omega: nat[1],
            alpha: nat[2],
            beta: nat[3],
        }
    }

    fn innovation(&self, nat: &[f64]) -> Result<Innovation> {
        match self.kind {
            Kind::ArT => Ok(Innovation::StudentT(UnitVarianceT::new(nat[4])?)),
            Kind::MaSkewT => Ok(Innovation::SkewT(SkewT::new(
                SkewTParams::new(nat[4], nat[5])?,
                true,
            )?)),
        }
    }
}

struct Fitted {
    natural: Vec<f64>,
    state: FilteredState,
}

fn fit_generic(r: &ReturnSeries, kind: Kind, opts: &FitOptions) -> Result<Fitted> {
    check_fit_len(r)?;
    if let Some(m) = opts.fixed_df {
        UnitVarianceT::new(m)?;
    }
    if let Some(xi) = opts.fixed_skew {
        SkewTParams::new(opts.fixed_df.unwrap_or(8.0), xi)?;
    }
    let x = r.values();
    let s2 = sample_variance(x);
    let tf = Transform {
        kind,
        fixed_df: opts.fixed_df,
        fixed_skew: opts.fixed_skew,
    };
    let neg_ll = |th: &[f64]| -> f64 {
        let nat = tf.to_natural(th);
        match tf.innovation(&nat) {
            Ok(innov) => -loglik(x, tf.spec(&nat), &innov, s2),
            Err(_) => f64::INFINITY,
        }
    };
    let scale = 1.0 / x.len() as f64;
    let objective = |th: &[f64]| scale * neg_ll(th);

    let coef0 = diagnostics::autocorrelation(x, 1).clamp(-0.9, 0.9);
    let mut natural0 = vec![coef0, 0.05 * s2, 0.095, 0.855, opts.fixed_df.unwrap_or(8.0)];
    if kind == Kind::MaSkewT {
        natural0.push(opts.fixed_skew.unwrap_or(1.0));
    }
    let center = tf.to_free(&natural0);
    let spread_all = [0.3, 1.0, 1.0, 1.0, 0.7, 0.25];
    let mut spread = spread_all[..4].to_vec();
    if opts.fixed_df.is_none() {
        spread.push(spread_all[4]);
    }
    if kind == Kind::MaSkewT && opts.fixed_skew.is_none() {
        spread.push(spread_all[5]);
    }
    let starts = optim::jittered_starts(&center, &spread, opts.starts.max(1), opts.seed);
    let (best, runs) = optim::multistart(objective, &starts, &opts.bfgs, opts.exec);

    let Some(best) = best.filter(|b| b.converged) else {
        let fallback = runs
            .iter()
            .filter(|m| m.fx.is_finite())
            .min_by(|a, b| a.fx.total_cmp(&b.fx));
        return Err(Error::Fit {
            message: format!("no converged start among {}", starts.len()),
            best_loglik: fallback.map_or(f64::NEG_INFINITY, |m| -m.fx / scale),
            best_params: fallback.map_or_else(Vec::new, |m| tf.to_natural(&m.x)),
        });
    };

    let natural = tf.to_natural(&best.x);
    let innov = tf.innovation(&natural)?;
    let mut state = filter(x, tf.spec(&natural), &innov, tf.free_len());
    let se_free =
        optim::delta_method_se(&neg_ll, &best.x, &|th| tf.to_natural(th), opts.hessian_step);
    state.std_errors = se_free;
    if opts.fixed_df.is_some() {
        state.std_errors[4] = 0.0;
    }
    if kind == Kind::MaSkewT && opts.fixed_skew.is_some() {
        state.std_errors[5] = 0.0;
    }
    Ok(Fitted { natural, state })
}

/// Fits AR(1)-GARCH(1,1)-t by maximum likelihood with the default protocol.
pub fn fit_ar_garch(r: &ReturnSeries) -> Result<(ArGarchParams, FilteredState)> {
    fit_ar_garch_with(r, &FitOptions::default())
}

pub fn fit_ar_garch_with(
    r: &ReturnSeries,
    opts: &FitOptions,
) -> Result<(ArGarchParams, FilteredState)> {
    let f = fit_generic(r, Kind::ArT, opts)?;
    let p = &f.natural;
    let params = ArGarchParams {
        phi1: p[0],
        omega: p[1],
        alpha: p[2],
        beta: p[3],
        m1: p[4],
    };
    Ok((params, f.state))
}

/// Fits MA(1)-GARCH(1,1)-skew-t by maximum likelihood with the default
/// protocol.
pub fn fit_ma_garch_skew(r: &ReturnSeries) -> Result<(MaGarchSkewParams, FilteredState)> {
    fit_ma_garch_skew_with(r, &FitOptions::default())
}

pub fn fit_ma_garch_skew_with(
    r: &ReturnSeries,
    opts: &FitOptions,
) -> Result<(MaGarchSkewParams, FilteredState)> {
    let f = fit_generic(r, Kind::MaSkewT, opts)?;
    let p = &f.natural;
    let params = MaGarchSkewParams {
        theta1: p[0],
        omega: p[1],
        alpha: p[2],
        beta: p[3],
        skew: SkewTParams { m: p[4], xi: p[5] },
    };
    Ok((params, f.state))
}

/// Probability integral transform of the standardized residuals, clamped
/// strictly inside `(0, 1)`.
pub fn pit(state: &FilteredState, innovation_cdf: impl Fn(f64) -> f64) -> Vec<f64> {
    state
        .std_residuals
        .iter()
        .map(|&z| innovation_cdf(z).clamp(PIT_EPS, 1.0 - PIT_EPS))
        .collect()
}

fn simulate(spec: ModelSpec, innov: &Innovation, len: usize, burn: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let uncond = spec.omega / (1.0 - spec.alpha - spec.beta);
    let (mut x_prev, mut eps_prev, mut s2_prev) = (0.0, 0.0, uncond);
    let mut out = Vec::with_capacity(len);
    for t in 0..len + burn {
        let mean = match spec.mean {
            MeanEq::Ar(phi) => phi * x_prev,
            MeanEq::Ma(theta) => theta * eps_prev,
        };
        let s2 = spec.omega + spec.alpha * eps_prev * eps_prev + spec.beta * s2_prev;
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let eps = s2.sqrt() * innov.quantile(u);
        let xt = mean + eps;
        if t >= burn {
            out.push(xt);
        }
        x_prev = xt;
        eps_prev = eps;
        s2_prev = s2;
    }
    out
}

/// Simulates `len` observations after a burn-in of 500, by inversion of the
/// innovation CDF on a ChaCha20 stream.
pub fn simulate_ar_garch(params: &ArGarchParams, len: usize, seed: u64) -> Result<ReturnSeries> {
    let innov = params.innovation()?;
    ReturnSeries::from_values(simulate(params.spec(), &innov, len, 500, seed))
}

pub fn simulate_ma_garch_skew(
    params: &MaGarchSkewParams,
    len: usize,
    seed: u64,
) -> Result<ReturnSeries> {
    let innov = params.innovation()?;
    ReturnSeries::from_values(simulate(params.spec(), &innov, len, 500, seed))
}
