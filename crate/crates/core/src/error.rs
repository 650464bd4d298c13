use thiserror::Error;

/// Errors raised while building or solving a design problem.
///
/// Indices carried by the variants are 0-based, matching the library API.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("specification error: {0}")]
    Specification(String),

    #[error(
        "target parameter {target} cannot be estimated without bias (residual {residual:.3e})"
    )]
    Infeasible { target: usize, residual: f64 },

    #[error("estimator for parameter {target} is biased (residual {residual:.3e})")]
    Biased { target: usize, residual: f64 },

    #[error("{count} supports exceed the enumeration limit of {limit}")]
    SizeGuard { count: u128, limit: u128 },
}

impl DesignError {
    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        DesignError::Specification(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, DesignError>;
