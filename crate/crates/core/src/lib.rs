//! Core of the university inventory service.
//!
//! Everything here is pure computation over an in-memory [`State`]: the
//! organisational tree, scoped permissions and delegations, the request
//! approval workflow, inventory mutations, search and reports, the audit
//! trail and the notification outbox. All writes go through
//! [`Store::transact`], which commits every change of a unit of work or none
//! of them.
//!
//! The crate is `no_std` (it needs `alloc`). Clocks, files, sockets and CSV
//! decoding live in the `uuis` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod audit;
pub mod authz;
pub mod bulk;
pub mod error;
pub mod inventory;
pub mod model;
pub mod org;
pub mod search;
pub mod store;
pub mod users;
pub mod workflow;

pub use audit::{AuditFilter, AuditRecord, EntityRef, Notification, Transport};
pub use authz::{Authority, Grant, PermissionAction, PermissionGroup, ScopedPermission};
pub use error::{Error, Result, RowError};
pub use model::{
    Asset, AssetGroup, AssetKind, AssetState, AssetTypeDef, Id, Level, Location, OrgUnit,
    PasswordDigest, Timestamp, UnitKind, User,
};
pub use store::{Snapshot, State, Store, Txn, SNAPSHOT_FORMAT_VERSION};
pub use workflow::{
    ApprovalRecord, ApprovalRoute, Decision, Request, RequestForm, RequestKind, RequestLine,
    RequestStatus, RouteSlot,
};
