//! Monte-Carlo and brute-force reference computations, independent of the
//! closed forms in [`crate::pelcov`].
//!
//! Random numbers come from ChaCha20 (`rand_chacha`), seeded with
//! `seed_from_u64(seed)`. Samples are produced in chunks of
//! [`STREAM_CHUNK`] draws; chunk `k` uses stream `k` of the generator, so a
//! batch is identical whether chunks run sequentially or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::copula::{check_open_unit, ConditionalCdf, CopulaParams};
use crate::dyncopula::{self, EvolutionParams};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::marginals::kendall_tau;
use crate::tdist::StudentT;

pub const STREAM_CHUNK: usize = 1 << 16;
/// Default half-width of the conditioning window of [`empirical_h`].
pub const DEFAULT_WINDOW: f64 = 0.005;
/// Minimum number of points inside the conditioning window.
pub const MIN_WINDOW_POINTS: usize = 200;
/// Smallest grid accepted by [`grid_roots`].
pub const MIN_GRID: usize = 10_000;
/// Bisection tolerance for the grid root refinement.
pub const GRID_XTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub pairs: Vec<(f64, f64)>,
    pub seed: u64,
    pub params: CopulaParams,
}

struct Bivariate {
    rho: f64,
    rho_c: f64,
    chi: ChiSquared<f64>,
    n: f64,
}

impl Bivariate {
    fn new(rho: f64, n: f64) -> Self {
        Self {
            rho,
            rho_c: ((1.0 - rho) * (1.0 + rho)).sqrt(),
            chi: ChiSquared::new(n).expect("n > 0"),
            n,
        }
    }

    fn draw(&self, rng: &mut ChaCha20Rng) -> (f64, f64) {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let w = (self.chi.sample(rng) / self.n).sqrt();
        (z1 / w, (self.rho * z1 + self.rho_c * z2) / w)
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Bivariate t scores `(X, Y)` with correlation `ρ` and `n` degrees of
/// freedom: a correlated standard normal pair divided by `sqrt(χ²_n / n)`.
pub fn sample_t_scores(
    p: CopulaParams,
    size: usize,
    seed: u64,
    exec: Execution,
) -> Vec<(f64, f64)> {
    let biv = Bivariate::new(p.rho(), p.n());
    let chunks = size.div_ceil(STREAM_CHUNK);
    exec::map_indices(exec, chunks, |k| {
        let mut rng = chunk_rng(seed, k);
        let len = STREAM_CHUNK.min(size - k * STREAM_CHUNK);
        (0..len).map(|_| biv.draw(&mut rng)).collect::<Vec<_>>()
    })
    .concat()
}

/// Copula sample: [`sample_t_scores`] mapped through `t_n` coordinate-wise.
pub fn sample_t_copula(p: CopulaParams, size: usize, seed: u64) -> Result<SampleBatch> {
    sample_t_copula_with(p, size, seed, Execution::default())
}

pub fn sample_t_copula_with(
    p: CopulaParams,
    size: usize,
    seed: u64,
    exec: Execution,
) -> Result<SampleBatch> {
    if size == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let t = StudentT::new(p.n())?;
    let scores = sample_t_scores(p, size, seed, exec);
    let pairs = exec::map_slice(exec, &scores, |&(x, y)| (t.cdf(x), t.cdf(y)));
    Ok(SampleBatch {
        pairs,
        seed,
        params: p,
    })
}

/// A Monte-Carlo proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub count: usize,
}

/// Fraction of pairs with `V ≤ v` among those with `|U − u| ≤ window`.
pub fn empirical_h(batch: &SampleBatch, u: f64, v: f64, window: f64) -> Result<Estimate> {
    check_open_unit("u", u)?;
    check_open_unit("v", v)?;
    if window.is_nan() || window <= 0.0 {
        return Err(Error::domain(format!(
            "window must be positive, got {window}"
        )));
    }
    let (mut count, mut hits) = (0usize, 0usize);
    for &(pu, pv) in &batch.pairs {
        if (pu - u).abs() <= window {
            count += 1;
            if pv <= v {
                hits += 1;
            }
        }
    }
    if count < MIN_WINDOW_POINTS {
        return Err(Error::InsufficientData(format!(
            "{count} points within {window} of u = {u}; need {MIN_WINDOW_POINTS}"
        )));
    }
    let p = hits as f64 / count as f64;
    Ok(Estimate {
        value: p,
        std_error: (p * (1.0 - p) / count as f64).sqrt(),
        count,
    })
}

/// Kendall's tau of a batch, with a standard error from `batches`
/// contiguous batch estimates.
pub fn kendall_tau_estimate(pairs: &[(f64, f64)], batches: usize) -> Estimate {
    let tau = |p: &[(f64, f64)]| {
        let (x, y): (Vec<f64>, Vec<f64>) = p.iter().copied().unzip();
        kendall_tau(&x, &y)
    };
    let size = pairs.len() / batches;
    let parts: Vec<f64> = pairs.chunks_exact(size).take(batches).map(tau).collect();
    let mean = parts.iter().sum::<f64>() / batches as f64;
    let var = parts.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    Estimate {
        value: tau(pairs),
        std_error: (var / batches as f64).sqrt(),
        count: pairs.len(),
    }
}

/// Precomputed t scores of an equispaced grid `u_i = i/(N+1)`,
/// `i = 1..=N`, reusable across `(v, ρ)` at fixed `n`.
#[derive(Debug, Clone)]
pub struct GridScanner {
    n: f64,
    scores: Vec<f64>,
    exec: Execution,
}

impl GridScanner {
    pub fn new(n: f64, grid_size: usize, exec: Execution) -> Result<Self> {
        if grid_size < MIN_GRID {
            return Err(Error::domain(format!(
                "grid size must be at least {MIN_GRID}, got {grid_size}"
            )));
        }
        let t = StudentT::new(n)?;
        let step = 1.0 / (grid_size + 1) as f64;
        let scores = exec::map_indices(exec, grid_size, |i| t.quantile((i + 1) as f64 * step));
        Ok(Self { n, scores, exec })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn u_at(&self, i: usize) -> f64 {
        (i + 1) as f64 / (self.scores.len() + 1) as f64
    }

    /// Roots of `h(u) − v` in ascending order.
    ///
    /// The sign of `h(u_i) − v` is read off the `t_{n+1}` argument against
    /// `t_{n+1}⁻¹(v)` (same sign, no CDF evaluation). The boundary limits of
    /// `h` act as values at `u = 0` and `u = 1`, so a root beyond the first
    /// or last grid point is still bracketed. Each bracket is bisected on
    /// `h` itself.
    pub fn roots(&self, v: f64, rho: f64) -> Result<Vec<f64>> {
        let params = CopulaParams::new(rho, self.n)?;
        let cond = ConditionalCdf::new(v, params)?;
        let c = cond.t_n1().quantile(v);
        let l0 = crate::copula::lower_limit(params);
        let positive = |x: f64| x > 0.0;

        let len = self.scores.len();
        const CHUNK: usize = 1 << 14;
        let chunks = len.div_ceil(CHUNK);
        let changes: Vec<usize> = exec::map_indices(self.exec, chunks, |k| {
            let lo = k * CHUNK;
            let hi = (lo + CHUNK).min(len);
            let mut prev = positive(cond.argument(self.scores[lo]) - c);
            let mut out = Vec::new();
            for i in lo + 1..hi {
                let s = positive(cond.argument(self.scores[i]) - c);
                if s != prev {
                    out.push(i);
                }
                prev = s;
            }
            // Boundary between this chunk and the next.
            if hi < len && positive(cond.argument(self.scores[hi]) - c) != prev {
                out.push(hi);
            }
            out
        })
        .concat();

        let mut brackets: Vec<(f64, f64, bool)> = Vec::new();
        let first = positive(cond.argument(self.scores[0]) - c);
        if positive(l0 - v) != first {
            brackets.push((0.0, self.u_at(0), first));
        }
        for &i in &changes {
            let s = positive(cond.argument(self.scores[i]) - c);
            brackets.push((self.u_at(i - 1), self.u_at(i), s));
        }
        let last = positive(cond.argument(self.scores[len - 1]) - c);
        if positive((1.0 - l0) - v) != last {
            brackets.push((self.u_at(len - 1), 1.0, !last));
        }

        Ok(brackets
            .into_iter()
            .map(|(lo, hi, hi_positive)| refine(&cond, v, lo, hi, hi_positive))
            .collect())
    }
}

/// Bisection with known endpoint signs; endpoints are never evaluated.
fn refine(cond: &ConditionalCdf, v: f64, mut lo: f64, mut hi: f64, hi_positive: bool) -> f64 {
    while hi - lo > GRID_XTOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (cond.eval(mid) - v > 0.0) == hi_positive {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Brute-force roots of `h(u) = v` over `grid_size` equispaced points.
pub fn grid_roots(v: f64, p: CopulaParams, grid_size: usize) -> Result<Vec<f64>> {
    GridScanner::new(p.n(), grid_size, Execution::default())?.roots(v, p.rho())
}

/// Simulates `size` pairs from the dynamic t copula, returning the pairs
/// and the correlation path that generated them. Sequential by nature; the
/// stream is ChaCha20 seeded with `seed`.
pub fn simulate_dynamic_copula(
    ev: &EvolutionParams,
    size: usize,
    seed: u64,
) -> (Vec<(f64, f64)>, Vec<f64>) {
    let n = ev.n.value();
    let t = StudentT::new(n).expect("n > 1");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(size);
    let mut rhos = Vec::with_capacity(size);
    let mut products: Vec<f64> = Vec::with_capacity(size);
    let mut prev = ev.rho_init;
    for i in 0..size {
        let lags = &products[i.saturating_sub(dyncopula::LAG_WINDOW)..i];
        let lag_mean = if lags.is_empty() {
            0.0
        } else {
            lags.iter().sum::<f64>() / lags.len() as f64
        };
        let rho = dyncopula::lambda1(ev.nu0 + ev.nu1 * prev + ev.nu2 * lag_mean)
            .clamp(-dyncopula::RHO_BOUND, dyncopula::RHO_BOUND);
        let (x, y) = Bivariate::new(rho, n).draw(&mut rng);
        let (u, v) = (t.cdf(x), t.cdf(y));
        pairs.push((u, v));
        // The recursion sees the scores of the pseudo-observations.
        products.push(t.quantile(u) * t.quantile(v));
        rhos.push(rho);
        prev = rho;
    }
    (pairs, rhos)
}
