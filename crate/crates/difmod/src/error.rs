use thiserror::Error;

/// Crate-wide error type. Mathematical verdicts (a failed check, an element
/// not in an image) are represented by ordinary return values where the API
/// calls for them; `Error` is for conditions that abort an operation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("ring mismatch: operands belong to different polynomial rings")]
    RingMismatch,
    #[error("modulus mismatch: {0}")]
    ModulusMismatch(String),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("operation requires positive characteristic")]
    CharacteristicZero,
    #[error("division by zero scalar")]
    DivisionByZero,
    #[error("exponent overflow in monomial arithmetic")]
    ExponentOverflow,
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("element is not in the image")]
    NotInImage,
    #[error("resolution length cap {0} exceeded")]
    CapExceeded(usize),
    #[error("perturbation is not small: nilpotency bound exceeded")]
    NotSmall,
    #[error("no primitive root of unity of order {0} in the coefficient field")]
    MissingRoot(u64),
    #[error("homology has infinite length; supply a codimension")]
    NeedCodim,
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
