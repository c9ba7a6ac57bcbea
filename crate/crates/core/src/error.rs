use thiserror::Error;

use crate::falpha::PotentialSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range input.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A point lies outside the space the group acts on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A problem exceeds a solver size guard.
    #[error("resource limit: {0}")]
    Resource(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// The concave program did not reach its gap tolerance. Carries the best
    /// feasible iterate found.
    #[error("solver did not converge after {iterations} iterations (duality gap {gap:e})")]
    NotConverged {
        iterations: usize,
        gap: f64,
        best: Box<PotentialSolution>,
    },

    #[error("rate fit failed: {0}")]
    Fit(String),

    /// An experiment aborted; `completed` lists the cells that finished.
    #[error("experiment aborted after {} completed cells: {source}", completed.len())]
    Partial {
        completed: Vec<(usize, usize, usize)>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by bad caller input (CLI exit code 2).
    pub fn is_argument(&self) -> bool {
        matches!(
            self,
            Error::Argument(_) | Error::Domain(_) | Error::Unsupported(_)
        )
    }

    /// True for size-guard failures, including partial experiment runs
    /// aborted by one (CLI exit code 3).
    pub fn is_resource(&self) -> bool {
        match self {
            Error::Resource(_) => true,
            Error::Partial { source, .. } => source.is_resource(),
            _ => false,
        }
    }
}
