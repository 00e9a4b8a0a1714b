use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("time grids do not match: ({}, dt={}) vs ({}, dt={})", left.0, left.1, right.0, right.1)]
    GridMismatch {
        left: (usize, f64),
        right: (usize, f64),
    },

    #[error("trajectory {index} became non-finite at step {step}")]
    TrajectoryBlowup { index: u64, step: usize },

    #[error("numerical instability in {stage}: {detail}")]
    Instability { stage: String, detail: String },

    #[error("degenerate stationary system: {0}")]
    DegenerateStationary(String),

    #[error("quadrature failed to converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
