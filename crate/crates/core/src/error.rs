use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the map-building and query algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("invalid record {doc_id:?}: {reason}")]
    InvalidRecord { doc_id: String, reason: String },
    #[error("vocabulary is empty after filtering (m_min={m_min}); thresholds too strict for this corpus")]
    EmptyVocabulary { m_min: u32 },
    #[error("entity {0} has no articles")]
    OrphanEntity(u32),
    #[error("optimization diverged: {0}")]
    Divergent(String),
    #[error("point {index} at ({x}, {y}) lies outside the unit square")]
    OutOfDomain { index: usize, x: f64, y: f64 },
    #[error("invalid tile address {z}/{x}/{y}")]
    InvalidTile { z: u8, x: u32, y: u32 },
    #[error("unknown facet {0:?}")]
    UnknownFacet(String),
    #[error("unknown value {value:?} for facet {facet:?}")]
    UnknownFacetValue { facet: String, value: String },
    #[error("facet {facet:?} references metadata field {field:?} that no entity carries")]
    MissingMetadataField { facet: String, field: String },
    #[error("malformed filter expression: {0}")]
    FilterSyntax(String),
    #[error("corrupt compressed id set: {0}")]
    CorruptIdSet(&'static str),
    #[error("invalid snapshot: {0}")]
    InvalidSnapshot(String),
}
