use thiserror::Error;

/// Errors raised across the crate. Each failure mode the library can report
/// is a distinct variant so callers can match on it.
#[derive(Debug, Error)]
pub enum Error {
    /// A token in an input stream could not be parsed as an integer.
    #[error("malformed token {token:?} at position {position}")]
    MalformedToken { token: String, position: usize },

    /// The input stream held more or fewer tokens than the header promised.
    #[error("token count mismatch: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize },

    /// A matrix violated the symmetry requirement.
    #[error("matrix asymmetric at ({row}, {col}): {a} != {b} (1-based)")]
    Asymmetric {
        row: usize,
        col: usize,
        a: i64,
        b: i64,
    },

    /// A matrix flagged zero-diagonal carried a nonzero diagonal entry.
    #[error("nonzero diagonal entry {value} at index {index} (1-based)")]
    NonzeroDiagonal { index: usize, value: i64 },

    /// Operand dimensions disagree.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A binary vector had the wrong number of ones.
    #[error("cardinality violation: expected {expected} ones, found {found}")]
    CardinalityViolation { expected: usize, found: usize },

    /// The reduced flow matrix is not a selector: it must have exactly one
    /// nonzero entry, positive and on the diagonal.
    #[error("not selector structure: {reason}")]
    NotSelectorStructure { reason: String },

    /// Clone-class reduced entries disagreed across representative pairs.
    #[error("clone classes ill-defined: a[{i},{k}]={a} but a[{i2},{k2}]={b} (1-based)")]
    IllDefinedReduction {
        i: usize,
        k: usize,
        a: i64,
        i2: usize,
        k2: usize,
        b: i64,
    },

    /// Automorphism search exceeded the configured element cap.
    #[error("group element cap exceeded: more than {cap} automorphisms found")]
    GroupCapExceeded { cap: usize },

    /// A node fixes more ones than the cardinality allows, or leaves too few
    /// free variables to reach it.
    #[error("infeasible node: |I1|={fixed_ones}, free={free}, cardinality={cardinality}")]
    InfeasibleNode {
        fixed_ones: usize,
        free: usize,
        cardinality: usize,
    },

    /// The penalty parameter rule is undefined on an all-zero matrix.
    #[error("zero matrix: penalty parameter rule is undefined")]
    ZeroMatrix,

    /// Exhaustive enumeration would exceed the configured budget.
    #[error("enumeration budget exceeded: {combinations} combinations > budget {budget}")]
    EnumerationBudget { combinations: u128, budget: u128 },

    /// A tree walk exceeded its depth budget.
    #[error("level budget exhausted after {levels} levels")]
    LevelBudget { levels: usize },

    /// A named bounder is not registered.
    #[error("unknown bounder {name:?}")]
    UnknownBounder { name: String },

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Solution file did not parse as a permutation or a 0/1 vector.
    #[error("unrecognized solution file: {0}")]
    UnrecognizedSolution(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
