use thiserror::Error;

use crate::VertexSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index sets overlap: {0} and {1}")]
    OverlappingSets(VertexSet, VertexSet),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("graph contains a directed cycle")]
    CyclicGraph,
    #[error("graph is not decomposable")]
    NotDecomposable,
    #[error("graph is not a forest")]
    NotForest,
    #[error("{what}: size {size} exceeds limit {limit}")]
    TooLarge { what: &'static str, size: usize, limit: usize },
    #[error("enumeration of {cells} test cells exceeds guard {limit}")]
    TooManyCells { cells: u128, limit: u128 },
    #[error("empty index set")]
    EmptyIndexSet,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unsupported innovation law at vertex {0}")]
    UnsupportedInnovation(usize),
    #[error("coordinate {0} is not charged by any ray")]
    UnchargedCoordinate(usize),
    #[error("no ray charges direction {0}")]
    UnchargedDirection(usize),
    #[error("margins are not standardized")]
    NotStandardized,
    #[error("tolerance must be positive")]
    ToleranceNotPositive,
    #[error("univariate margins disagree at vertex {0}")]
    InconsistentMargins(usize),
    #[error("kernel margin deviates from declared margin by {0:e}")]
    MarginMismatch(f64),
    #[error("threshold lies below the smallest grid node")]
    EpsBelowGrid,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("non-finite value")]
    NonFinite,
    #[error("correlation {0} outside the admissible range")]
    RhoOutOfRange(f64),
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("quadrature budget exceeded: {0}")]
    QuadratureBudgetExceeded(String),
    #[error("survival function is not positive on the grid")]
    NonPositiveSurvival,
    #[error("too few samples: {have} < {need}")]
    TooFewSamples { have: usize, need: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Errors raised by enumeration or quadrature guards rather than bad input.
    pub fn is_resource_guard(&self) -> bool {
        matches!(
            self,
            Error::TooLarge { .. } | Error::TooManyCells { .. } | Error::QuadratureBudgetExceeded(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_disjoint(sets: &[VertexSet]) -> Result<()> {
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if !a.is_disjoint(*b) {
                return Err(Error::OverlappingSets(*a, *b));
            }
        }
    }
    Ok(())
}

pub(crate) fn check_within(sets: &[VertexSet], n: usize) -> Result<()> {
    for s in sets {
        if s.bound() > n {
            return Err(Error::UnknownVertex(format!("{}", s.bound())));
        }
    }
    Ok(())
}
