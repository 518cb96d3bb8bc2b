use thiserror::Error;

use crate::field::FieldCtx;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("field context mismatch: {left} vs {right}")]
    ContextMismatch { left: FieldCtx, right: FieldCtx },
    #[error("division by zero")]
    DivisionByZero,
    #[error("modulus {0} is not an odd prime below 2^31")]
    InvalidModulus(u64),
    #[error("characteristic-2 fields are not supported")]
    CharacteristicTwo,
    #[error("no primitive {n}-th root of unity in F_{p}")]
    NoRootExists { n: u64, p: u32 },
    #[error("operation needs a prime field")]
    RationalUnsupported,
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: u128, cap: usize },
    #[error("entry ({i}, {j}) outside a {rows}x{cols} matrix")]
    IndexOutOfBounds { i: usize, j: usize, rows: usize, cols: usize },
    #[error("duplicate entry at ({i}, {j})")]
    DuplicateEntry { i: usize, j: usize },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("estimated work {estimate} exceeds cap {cap}")]
    WorkCapExceeded { estimate: u128, cap: u128 },
    #[error("omega must be nonzero")]
    OmegaZero,
    #[error("entry ({row}, {col}) of the first row or column is zero")]
    OuterZero { row: usize, col: usize },
    #[error("depth must be at least {min}, got {got}")]
    DepthTooSmall { got: usize, min: usize },
    #[error("group size {group} does not divide {n}")]
    GroupMismatch { group: usize, n: usize },
    #[error("length {0} is not a power of two")]
    LengthNotPowerOfTwo(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{0} does not divide {1}")]
    DivisorMismatch(usize, usize),
    #[error("input circuit does not compute the stated base power")]
    UnverifiedInput,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("invalid witness: {0}")]
    InvalidWitness(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
