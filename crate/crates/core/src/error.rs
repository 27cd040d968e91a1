use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the admissible range of its catalog entry.
    #[error("parameter out of range: {0}")]
    ParameterDomain(String),

    /// The requested symbol has no path sampler; it is eigensolver-only.
    #[error("no subordinator sampler for `{0}`; this symbol is eigensolver-only")]
    UnsupportedSampler(String),

    /// An iterative routine failed to meet its tolerance contract.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Argument outside the range where the evaluation stays in f64.
    #[error("argument out of admissible range: {0}")]
    Range(String),

    /// Problem size exceeds the configured capacity limit.
    #[error("capacity exceeded: {got} {what} > cap {cap}")]
    Capacity {
        what: &'static str,
        got: usize,
        cap: usize,
    },

    /// A potential evaluated to a non-finite value on a grid point.
    #[error("potential is not finite at grid point {0:?}")]
    SingularPotential(Vec<f64>),

    /// A declared bound or caller assertion was violated at run time.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A documented precondition does not hold for the given inputs.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
