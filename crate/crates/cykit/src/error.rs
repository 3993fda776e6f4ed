//! Error taxonomy shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum CykError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("composition error: {0}")]
    Composition(String),
    #[error("degree error: {0}")]
    Degree(String),
    #[error("d^2 != 0 on generator `{generator}`: residual {residual}")]
    DSquare { generator: String, residual: String },
    #[error("not invertible: `{0}` (must be a closed degree-0 generator)")]
    NotInvertible(String),
    #[error("incompatible source presentations: {0}")]
    IncompatibleSource(String),
    #[error("infinite rank: {0}")]
    InfiniteRank(String),
    #[error("twisted complex condition violated: {0}")]
    TwistedConditionViolated(String),
    #[error("not a semi-free extension: {0}")]
    NotExtension(String),
    #[error("not semi-free: {0}")]
    NotSemiFree(String),
    #[error("deformation is not closed: {0}")]
    NotClosedDeformation(String),
    #[error("relative pair is not closed: {0}")]
    NotClosedPair(String),
    #[error("element is not closed: {0}")]
    NotClosed(String),
    #[error("not a negative cyclic lift: residual {0}")]
    NotALift(String),
    #[error("no solution within length bound {bound}; a larger bound may succeed")]
    NoSolutionAtBound { bound: usize },
    #[error("perturbation condition ({condition}) violated: {residual}")]
    ConditionViolated { condition: u8, residual: String },
    #[error("deformation not allowed in localized mode (eta_A must vanish)")]
    DeformationNotAllowedInLocalizedMode,
    #[error("missing Calabi-Yau certificate for {0}")]
    MissingCYCertificate(String),
    #[error("wrong codimension: {0}")]
    WrongCodimension(String),
    #[error("unsupported space descriptor: {0}")]
    UnsupportedDescriptor(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("differential does not respect the word-length filtration: {0}")]
    FiltrationViolated(String),
    #[error("negative degrees present: {0}")]
    NegativeDegrees(String),
    #[error("wrong shape: {0}")]
    WrongShape(String),
    #[error("truncation exceeded: {0}")]
    TruncationExceeded(String),
    #[error("{0}")]
    Other(String),
}
