use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Two operands have incompatible shapes.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// An input lies outside the domain of the operation (e.g. non positive-definite).
    #[error("domain error: {0}")]
    Domain(String),

    /// Enumeration would exceed the configured budget.
    #[error("enumeration budget exceeded: {requested} words requested, limit is {limit}")]
    Budget { requested: f64, limit: f64 },

    /// The nondegeneracy estimate collapsed to zero.
    #[error("nondegeneracy violated: gamma estimate {gamma:e} (witness c = {witness_c:?}, e = {witness_e:?})")]
    Nondegeneracy {
        gamma: f64,
        witness_c: Vec<f64>,
        witness_e: Vec<f64>,
    },

    /// Power iteration did not reach the requested projective tolerance.
    #[error("no convergence after {iterations} iterations (theta = {theta:e}, diameter estimate = {diameter:e})")]
    NonConvergence {
        iterations: usize,
        theta: f64,
        diameter: f64,
    },

    /// A cylinder of zero mass was used as a denominator.
    #[error("degenerate cylinder: {0}")]
    Degenerate(String),

    /// An accumulated scale left the representable range.
    #[error("numeric range exceeded: {0}")]
    NumericRange(String),

    /// A sampled contract check failed.
    #[error("contract violated: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of numerical origin (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::NumericRange(_)
                | Error::Degenerate(_)
                | Error::Contract(_)
                | Error::Nondegeneracy { .. }
        )
    }
}
