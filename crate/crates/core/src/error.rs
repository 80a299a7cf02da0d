use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected} samples, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("spectral solver: {0}")]
    Spectral(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("order error: requested {requested}, available {available}")]
    Order { requested: usize, available: usize },

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("orthogonality violated: pairing with {name} is {value:e}")]
    Orthogonality { name: String, value: f64 },

    #[error("ill-conditioned system (condition estimate {cond:e}): {what}")]
    Conditioning { what: String, cond: f64 },

    #[error("instability at tau = {tau}: growth factor {growth:e} per step")]
    Instability { tau: f64, growth: f64 },

    #[error("index set caps differ: {0} vs {1}")]
    Cap(f64, f64),

    #[error("range error: {0}")]
    Range(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("data norm {norm:e} exceeds the size bound {epsilon:e}")]
    DataTooLarge { norm: f64, epsilon: f64 },

    #[error("sign map not opposite at bracket ends: S(-C1) = {lower}, S(+C1) = {upper}")]
    Topological { lower: i8, upper: i8 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures that come from the numerics rather than the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Spectral(_)
                | Error::Solver(_)
                | Error::Conditioning { .. }
                | Error::Instability { .. }
        )
    }

    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Precondition(_) | Error::Orthogonality { .. } | Error::Topological { .. }
        )
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
