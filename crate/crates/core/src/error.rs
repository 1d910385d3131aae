use thiserror::Error;

/// Errors raised by the operators, calculators and the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A fractional order outside the admissible range of an operator.
    #[error("invalid order {value}: {reason}")]
    Order { value: f64, reason: String },

    /// Non-finite or otherwise malformed input samples.
    #[error("rejected input: {0}")]
    Input(String),

    /// Parameter values that break an ordering or range constraint.
    #[error("invalid parameters: {0}")]
    Parameter(String),

    /// The power-rule exponent makes the result non-integrable.
    #[error("nonintegrable singularity: exponent {beta} minus order {theta} is <= -1")]
    Singularity { beta: f64, theta: f64 },

    /// A check or identity was asked to run outside its hypotheses.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// Grid sizes, supports or shapes that do not fit together.
    #[error("geometry mismatch: {0}")]
    Geometry(String),

    /// A quadrature produced a non-finite accumulation.
    #[error("numerical integration failed: {0}")]
    Integration(String),

    /// Explosive growth of the linear scheme; the step is too large.
    #[error(
        "step-size instability at t = {time}: sup-norm grew by {factor:.3e} in one step; reduce h"
    )]
    StepSize { time: f64, factor: f64 },

    /// The lifespan bound has no interior minimiser for these parameters.
    #[error("no interior minimum: base {base} is not positive")]
    NoInteriorMinimum { base: f64 },

    /// A request outside the implemented regimes.
    #[error("unsupported regime: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
