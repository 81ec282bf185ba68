//! Unconstrained minimisation: BFGS with finite-difference gradients,
//! Brent's 1-D method, and finite-difference Hessians for standard errors.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::{self, Execution};

#[derive(Debug, Clone)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Convergence when the sup-norm of the gradient falls below this.
    pub grad_tol: f64,
    /// ...or when `f` changes by less than this (relative) for several
    /// consecutive iterations.
    pub f_tol: f64,
    pub fd_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-5,
            f_tol: 1e-13,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

pub fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Minimises `f` from `x0` by BFGS with backtracking (Armijo) line search.
/// Non-finite objective values are treated as `+∞`.
pub fn bfgs<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &BfgsOptions) -> Minimum {
    let f = |x: &[f64]| finite_or_inf(f(x));
    let dim = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    if !fx.is_finite() {
        return Minimum {
            x: x0.to_vec(),
            fx,
            iterations: 0,
            converged: false,
        };
    }
    let mut g = DVector::from_vec(gradient(&f, x.as_slice(), opts.fd_step));
    let mut inv_h = DMatrix::<f64>::identity(dim, dim);
    let mut stalls = 0;
    for iter in 0..opts.max_iter {
        if g.amax() < opts.grad_tol {
            return Minimum {
                x: x.as_slice().to_vec(),
                fx,
                iterations: iter,
                converged: true,
            };
        }
        let mut dir = -(&inv_h * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 || !slope.is_finite() {
            inv_h = DMatrix::identity(dim, dim);
            dir = -g.clone();
            slope = g.dot(&dir);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * step;
            let ft = f(trial.as_slice());
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // No descent along the quasi-Newton direction: converged to
            // within finite-difference noise.
            return Minimum {
                x: x.as_slice().to_vec(),
                fx,
                iterations: iter,
                converged: g.amax() < 1e3 * opts.grad_tol,
            };
        };
        let g_new = DVector::from_vec(gradient(&f, x_new.as_slice(), opts.fd_step));
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(dim, dim);
            let left = &eye - (&s * y.transpose()) * rho;
            let right = &eye - (&y * s.transpose()) * rho;
            inv_h = &left * &inv_h * &right + (&s * s.transpose()) * rho;
        }
        let rel_change = (fx - f_new).abs() / fx.abs().max(1.0);
        stalls = if rel_change < opts.f_tol {
            stalls + 1
        } else {
            0
        };
        x = x_new;
        fx = f_new;
        g = g_new;
        if stalls >= 3 {
            return Minimum {
                x: x.as_slice().to_vec(),
                fx,
                iterations: iter + 1,
                converged: true,
            };
        }
    }
    Minimum {
        x: x.as_slice().to_vec(),
        converged: g.amax() < opts.grad_tol,
        fx,
        iterations: opts.max_iter,
    }
}

/// Runs BFGS from every start and keeps the lowest finite objective. Ties
/// resolve to the earliest start, so the outcome is independent of the
/// execution strategy.
pub fn multistart<F>(
    f: F,
    starts: &[Vec<f64>],
    opts: &BfgsOptions,
    exec: Execution,
) -> (Option<Minimum>, Vec<Minimum>)
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let runs = exec::map_slice(exec, starts, |s| bfgs(&f, s, opts));
    let best = runs
        .iter()
        .filter(|m| m.fx.is_finite())
        .fold(None::<&Minimum>, |best, m| match best {
            Some(b) if b.fx <= m.fx => Some(b),
            _ => Some(m),
        })
        .cloned();
    (best, runs)
}

/// Deterministic jittered starts around `center`: the center itself first,
/// then `count - 1` points offset by uniform draws in `±spread[i]`.
pub fn jittered_starts(center: &[f64], spread: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![center.to_vec()];
    while out.len() < count {
        out.push(
            center
                .iter()
                .zip(spread)
                .map(|(&c, &s)| c + s * rng.gen_range(-1.0..=1.0))
                .collect(),
        );
    }
    out
}

/// Central-difference Hessian with absolute step `h`.
pub fn hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: f64) -> DMatrix<f64> {
    let dim = x.len();
    let mut out = DMatrix::zeros(dim, dim);
    let mut p = x.to_vec();
    let f0 = f(x);
    for i in 0..dim {
        p[i] = x[i] + h;
        let up = f(&p);
        p[i] = x[i] - h;
        let down = f(&p);
        p[i] = x[i];
        out[(i, i)] = (up - 2.0 * f0 + down) / (h * h);
        for j in 0..i {
            let mut eval = |di: f64, dj: f64| {
                p[i] = x[i] + di;
                p[j] = x[j] + dj;
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Inverts a symmetric positive-definite matrix (e.g. an observed
/// information matrix). Returns `None` when it is not positive definite.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    m.clone().cholesky().map(|c| c.inverse())
}

/// Standard errors of natural parameters `g(θ)` from the Hessian of the
/// negative log-likelihood in the unconstrained space, by the delta method
/// with a finite-difference Jacobian of `g`. `NaN` where the Hessian is not
/// positive definite.
pub fn delta_method_se<F, G>(neg_loglik: &F, theta: &[f64], to_natural: &G, h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let nat0 = to_natural(theta);
    let k = nat0.len();
    let Some(cov) = spd_inverse(&hessian(neg_loglik, theta, h)) else {
        return vec![f64::NAN; k];
    };
    let dim = theta.len();
    let mut jac = DMatrix::zeros(k, dim);
    let mut p = theta.to_vec();
    for j in 0..dim {
        let step = 1e-6 * theta[j].abs().max(1.0);
        p[j] = theta[j] + step;
        let up = to_natural(&p);
        p[j] = theta[j] - step;
        let down = to_natural(&p);
        p[j] = theta[j];
        for i in 0..k {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * step);
        }
    }
    let nat_cov = &jac * cov * jac.transpose();
    (0..k).map(|i| nat_cov[(i, i)].max(0.0).sqrt()).collect()
}

/// Brent's method for a 1-D minimum on `[a, b]`.
pub fn brent_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let f = |x: f64| finite_or_inf(f(x));
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0_f64, 0.0_f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn bfgs_rosenbrock() {
        let m = bfgs(rosenbrock, &[-1.2, 1.0], &BfgsOptions::default());
        assert!(m.converged);
        assert!(
            (m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4,
            "{:?}",
            m
        );
    }

    #[test]
    fn multistart_is_strategy_independent() {
        let starts = jittered_starts(&[0.0, 0.0], &[2.0, 2.0], 8, 7);
        let (a, _) = multistart(
            rosenbrock,
            &starts,
            &BfgsOptions::default(),
            Execution::Sequential,
        );
        let (b, _) = multistart(
            rosenbrock,
            &starts,
            &BfgsOptions::default(),
            Execution::Parallel,
        );
        assert_eq!(a.unwrap().x, b.unwrap().x);
    }

    #[test]
    fn brent_parabola() {
        let (x, fx) = brent_min(|x| (x - 0.3).powi(2) + 1.0, -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
        assert!((fx - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hessian_of_quadratic() {
        let f = |x: &[f64]| 3.0 * x[0] * x[0] + x[0] * x[1] + 2.0 * x[1] * x[1];
        let h = hessian(&f, &[0.4, -0.2], 1e-4);
        assert!((h[(0, 0)] - 6.0).abs() < 1e-6);
        assert!((h[(0, 1)] - 1.0).abs() < 1e-6);
        assert!((h[(1, 1)] - 4.0).abs() < 1e-6);
    }
}
