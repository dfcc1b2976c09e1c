use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Out-of-range physical or numerical parameter.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Invalid configuration (meshes, loads, constraint caps, ε tilings).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated an operation's precondition, or a checked
    /// postcondition failed.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e}, target {target:.1e})")]
    Solver {
        iterations: usize,
        residual: f64,
        target: f64,
    },
}
