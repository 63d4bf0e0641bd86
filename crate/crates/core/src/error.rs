use thiserror::Error;

/// Errors surfaced by dataset construction, partitioning and scoring.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row count mismatch: codes have {codes} rows, factors have {factors}")]
    RowCountMismatch { codes: usize, factors: usize },
    #[error("dataset must contain at least one row")]
    EmptyDataset,
    #[error("non-finite code value at row {row}, column {col}")]
    NonFiniteCode { row: usize, col: usize },
    #[error("factor column {col} has a single distinct value and admits no intervention contrast")]
    ConstantFactor { col: usize },
    #[error("factor index {index} out of range (K = {k})")]
    FactorIndexOutOfRange { index: usize, k: usize },
    #[error("feature index {index} out of range (K' = {k_prime})")]
    FeatureIndexOutOfRange { index: usize, k_prime: usize },
    #[error("index sets I and J must be disjoint (both contain factor {index})")]
    OverlappingIndexSets { index: usize },
    #[error("factor set J must be non-empty")]
    EmptyNuisanceSet,
    #[error("feature set L must be non-empty")]
    EmptyFeatureSet,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("partition cell {outer}/{inner:?} does not exist")]
    MissingCell { outer: usize, inner: Option<usize> },
    #[error("zero total weight in a partition cell; frequency tables are inconsistent")]
    ZeroTotalWeight,
    #[error("crossed fast path requires a fully crossed dataset")]
    NotFullyCrossed,
    #[error("domain-shift factor set S must be non-empty and must not cover all factors")]
    InvalidDomainShiftSet,
    #[error("invalid discretization plan: {0}")]
    InvalidPlan(String),
    #[error("invalid SCM config: {0}")]
    InvalidScm(String),
    #[error("enumeration budget exceeded: {tuples} realization tuples (limit {limit})")]
    EnumerationBudget { tuples: u128, limit: u128 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
