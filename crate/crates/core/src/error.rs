use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("{what} index {index} out of range (length {len})")]
    Range {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate point: K_N(x, x) = {value} at {point:?}")]
    DegeneratePoint { point: Vec<f64>, value: f64 },

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error(
        "rejection sampler exceeded {iterations} proposals at step {step}; raise the safety factor"
    )]
    BoundTooTight { step: usize, iterations: u64 },

    #[error("rejection bound violated at {point:?}: envelope ratio {ratio} > 1")]
    BoundViolation { point: Vec<f64>, ratio: f64 },

    #[error("no rejection bound available: {0}")]
    BoundUnavailable(String),

    #[error("integrand returned non-finite value {value} at {point:?}")]
    Evaluation { point: Vec<f64>, value: f64 },

    #[error("proposal density vanishes at {point:?} where the integrand does not")]
    InvalidProposal { point: Vec<f64> },

    #[error("composite integrand is unbounded: {0}")]
    UnboundedComposite(String),

    #[error("dimension {d} unsupported (maximum {max})")]
    UnsupportedDimension { d: usize, max: usize },

    #[error("degenerate regression: {0}")]
    RegressionDegenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error comes from the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalDegeneracy(_)
                | Error::BoundTooTight { .. }
                | Error::BoundViolation { .. }
                | Error::DegeneratePoint { .. }
                | Error::Evaluation { .. }
                | Error::UnboundedComposite(_)
                | Error::RegressionDegenerate(_)
        )
    }
}
