use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Product of two scalars that both carry non-rational symbols.
    #[error("product of two non-rational symbolic scalars is not representable ({lhs} * {rhs})")]
    SymbolProductUnrepresentable { lhs: String, rhs: String },

    #[error("symbol `{0}` is not declared in the symbol table")]
    UnknownSymbol(String),

    #[error("symbol `{0}` declared twice with different witnesses")]
    DuplicateSymbol(String),

    #[error("symbol `{name}` has invalid witness {value} (must be finite and nonzero)")]
    InvalidWitness { name: String, value: f64 },

    #[error("invalid rational literal `{0}`")]
    InvalidRational(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("character is not unitary")]
    NotUnitary,

    #[error("fiber dimension m = {m} exceeds the limit {max}")]
    FiberTooLarge { m: usize, max: usize },

    #[error("complex dimension n + m = {dim} exceeds the limit {max}")]
    DimensionCap { dim: usize, max: usize },

    #[error("bidegree ({p}, {q}) out of range for complex dimension {dim}")]
    BidegreeOutOfRange { p: usize, q: usize, dim: usize },

    #[error("basis element {0} is not in the basis")]
    NotInBasis(String),

    #[error("form is not homogeneous")]
    MixedBidegree,

    #[error("scalar {0} is not invertible in the exact layer")]
    NotInvertible(String),

    #[error("invalid builder input: {0}")]
    InvalidBuilder(String),

    #[error("malformed spec: {0}")]
    MalformedSpec(String),
}
