//! Probability-equivalent levels of CoVaR and VaR (PELCoV) for bivariate
//! Student-t copulas.
//!
//! The crate is organised bottom-up:
//!
//! - [`tdist`]: Student-t and Fernández–Steel skew-t special functions.
//! - [`copula`]: conditional CDF `h(u) = ∂₁C(u, v)`, copula CDF and density,
//!   critical point, boundary limits and tail dependence.
//! - [`pelcov`]: closed-form solver for the set of levels `u` with
//!   `CoVaR_{v,u}[Y|X] = VaR_v[Y]`, with region classification.
//! - [`marginals`]: AR(1)/MA(1)+GARCH(1,1) marginal fits, PIT and residual
//!   diagnostics.
//! - [`dyncopula`]: static pseudo-MLE of the t copula and the time-varying
//!   correlation recursion fitted by two-stage maximum likelihood.
//! - [`monitor`]: the end-to-end monitoring pipeline, FRED CSV ingestion and
//!   report output.
//! - [`oracle`]: Monte-Carlo and brute-force reference computations.
//!
//! Batch work (grid scans, sampling, multistart optimisation, per-date
//! solves) runs on rayon when the `parallel` feature is enabled and falls
//! back to plain iteration otherwise; see [`exec::Execution`].

pub mod copula;
pub mod dyncopula;
pub mod error;
pub mod exec;
pub mod marginals;
pub mod monitor;
pub mod optim;
pub mod oracle;
pub mod pelcov;
pub mod quad;
pub mod roots;
pub mod special;
pub mod tdist;

pub use copula::CopulaParams;
pub use error::{Error, Result};
pub use exec::Execution;
pub use pelcov::{PelcovQuery, PelcovSolution};
pub use tdist::{DegreesOfFreedom, SkewT, SkewTParams, StudentT};
