use crate::measure::{AtomId, BlockId};
use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index mismatch: {0}")]
    IndexMismatch(String),

    #[error("divergent tail: {0}")]
    DivergentTail(String),

    #[error("unknown atom: {0}")]
    UnknownAtom(String),

    #[error("unknown block id {}", (.0).0)]
    UnknownBlock(BlockId),

    #[error("refinement count {requested} exceeds the configured maximum {max}")]
    RefinementLimitExceeded { requested: u32, max: u32 },

    #[error("negative term at position {0}")]
    NegativeTerm(usize),

    #[error("matrix realization requires a finite atomic space (no blocks, no tail)")]
    NotFiniteAtomic,

    #[error("dimension {0} exceeds the brute-force cap {1}")]
    DimensionTooLarge(usize, usize),

    #[error("trace norm is defined here only for p = q = 2 realizations")]
    NotHilbertCase,

    #[error("family of {0} vectors exceeds the sign-enumeration cap {1}")]
    FamilyTooLarge(usize, usize),

    #[error("J_{0} is essentially unbounded on the tail")]
    UnboundedJ(f64),

    #[error("operator is neither a multiplication (identity map) nor a composition (unit weight)")]
    NotSpecialCase,

    #[error("not a nuclear instance: {0}")]
    NotNuclearInstance(String),

    #[error("truncation {0} is too small to certify the representation tail")]
    TruncationTooSmall(u64),

    #[error("weight has no support on the non-atomic part")]
    NoNonatomicSupport,

    #[error("witness construction is implemented for the p = q regime only")]
    WrongRegime,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation failed: {0}")]
    Validation(String),
}

impl Error {
    pub(crate) fn unknown_atom(id: AtomId) -> Self {
        Error::UnknownAtom(format!("explicit atom id {}", id.0))
    }

    pub(crate) fn unknown_tail_atom(n: u64) -> Self {
        Error::UnknownAtom(format!("tail atom index {n}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
