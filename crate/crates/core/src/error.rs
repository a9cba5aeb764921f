use thiserror::Error;

/// Errors surfaced by simulator operations.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("density {density} requires {requested} links but a complete graph on {num_users} nodes has only {max}")]
    TooManyLinks {
        density: f64,
        num_users: u32,
        requested: usize,
        max: usize,
    },

    #[error("elasticity matrix is singular or ill-conditioned (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("price solve residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("program {0} has non-positive self-elasticity; its demand curve cannot be inverted")]
    NonInvertibleCurve(usize),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
