use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Optimisation failed on every start; carries the best point seen.
    #[error("fit did not converge: {message} (best loglik {best_loglik}, params {best_params:?})")]
    Fit {
        message: String,
        best_loglik: f64,
        best_params: Vec<f64>,
    },

    #[error("estimate on parameter boundary: {0}")]
    Boundary(String),

    #[error("{count} date(s) have two PELCoV levels at v = {v} (first: {first_date})")]
    Multiplicity {
        v: f64,
        count: usize,
        first_date: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
