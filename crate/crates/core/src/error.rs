use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("image dimensions {height}x{width} are not powers of two")]
    NotPowerOfTwo { height: usize, width: usize },
    #[error("normal system is singular (no identity weight, no smoothing weight covering DC, empty mask)")]
    SingularSystem,
    #[error("hyperparameter {0} must be nonnegative and finite")]
    NegativeHyperparameter(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("point lies outside R^n x R^2_+")]
    OutsideDomain,
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("need {needed} images, only {available} available")]
    InsufficientImages { needed: usize, available: usize },
    #[error("search budget {budget} is smaller than the {startup} startup trials")]
    BudgetTooSmall { budget: usize, startup: usize },
    #[error("lower-level solution violates feasibility by {0:.3e}")]
    InfeasibleLower(f64),
}

impl Error {
    pub(crate) fn mismatch(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}
