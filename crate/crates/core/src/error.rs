use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::Id;
use crate::store::IndexKind;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// One rejected row of a bulk entry file.
///
/// `row` counts data rows from 1; row 0 designates the file as a whole
/// (missing header, no data rows, too many rows).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub row: usize,
    pub column: Option<String>,
    pub reason: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.column {
            Some(col) => write!(f, "row {}, column {}: {}", self.row, col, self.reason),
            None => write!(f, "row {}: {}", self.row, self.reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("permission denied")]
    PermissionDenied,
    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: Id },
    #[error("user account is inactive")]
    InactiveUser,
    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),
    #[error("organisational unit still owns assets, locations, users or child units")]
    UnitNotEmpty,
    #[error("delegation exceeds the grantor's own permissions")]
    ExceedsGrantorAuthority,
    #[error("a delegation must carry at least one permission")]
    EmptyDelegation,
    #[error("name already in use: {0}")]
    DuplicateName(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("asset {0} is not available")]
    AssetUnavailable(String),
    #[error("no asset with serial number {0}")]
    UnknownSerial(String),
    #[error("request has neither text nor asset lines")]
    EmptyRequest,
    #[error("asset type {0} does not exist")]
    UnknownType(String),
    #[error("serial number {0} already in use")]
    DuplicateSerial(String),
    #[error("field {0} cannot be modified")]
    ImmutableField(String),
    #[error("destination belongs to another unit; file a transfer request")]
    CrossUnitTransfer,
    #[error("assets belong to different units")]
    MixedOwnership,
    #[error("asset {0} already belongs to a group")]
    AlreadyGrouped(Id),
    #[error("location still holds assets")]
    LocationOccupied,
    #[error("room {0} already exists")]
    DuplicateRoom(String),
    #[error("transfers cannot originate from an external unit")]
    SourceIsExternal,
    #[error("bulk entry rejected: {}", first_reason(.0))]
    ValidationFailed(Vec<RowError>),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("query exceeded its deadline")]
    QueryTimeout,
    #[error("unique constraint violated on {0:?}")]
    ConstraintViolation(IndexKind),
    #[error("snapshot format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("store is not empty")]
    NonEmptyStore,
    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),
    #[error("notification transport failed: {0}")]
    TransportFailure(String),
}

fn first_reason(rows: &[RowError]) -> String {
    use alloc::string::ToString;
    match rows.first() {
        Some(r) if rows.len() == 1 => r.to_string(),
        Some(r) => alloc::format!("{} (and {} more)", r, rows.len() - 1),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn not_found(kind: &'static str, id: &Id) -> Self {
        Error::NotFound { kind, id: id.clone() }
    }

    /// Stable machine-readable code used in API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::PermissionDenied => "permission_denied",
            Error::NotFound { .. } => "not_found",
            Error::InactiveUser => "inactive_user",
            Error::InvalidHierarchy(_) => "invalid_hierarchy",
            Error::UnitNotEmpty => "unit_not_empty",
            Error::ExceedsGrantorAuthority => "exceeds_grantor_authority",
            Error::EmptyDelegation => "empty_delegation",
            Error::DuplicateName(_) => "duplicate_name",
            Error::InvalidState(_) => "invalid_state",
            Error::AssetUnavailable(_) => "asset_unavailable",
            Error::UnknownSerial(_) => "unknown_serial",
            Error::EmptyRequest => "empty_request",
            Error::UnknownType(_) => "unknown_type",
            Error::DuplicateSerial(_) => "duplicate_serial",
            Error::ImmutableField(_) => "immutable_field",
            Error::CrossUnitTransfer => "cross_unit_transfer",
            Error::MixedOwnership => "mixed_ownership",
            Error::AlreadyGrouped(_) => "already_grouped",
            Error::LocationOccupied => "location_occupied",
            Error::DuplicateRoom(_) => "duplicate_room",
            Error::SourceIsExternal => "source_is_external",
            Error::ValidationFailed(_) => "validation_failed",
            Error::InvalidInput(_) => "invalid_input",
            Error::QueryTimeout => "query_timeout",
            Error::ConstraintViolation(_) => "constraint_violation",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::NonEmptyStore => "non_empty_store",
            Error::MalformedSnapshot(_) => "malformed_snapshot",
            Error::TransportFailure(_) => "transport_failure",
        }
    }
}
