//! Append-only audit trail and the notification outbox.
//!
//! Audit records are written by [`Txn::record`](crate::store::Txn::record)
//! inside the transaction that performs the mutation, so a rolled back
//! transaction leaves no record. Notifications are rows of the store; a
//! [`Transport`] delivers them out of band.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::authz::{Authority, PermissionAction};
use crate::error::{Error, Result};
use crate::model::{Id, Timestamp};
use crate::store::{State, Txn};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityRef {
    pub kind: String,
    pub id: Id,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub at: Timestamp,
    pub actor_id: Id,
    pub action: String,
    pub entity: EntityRef,
    pub before: Option<Value>,
    pub after: Option<Value>,
}

impl AuditRecord {
    /// Summary records describe a batch whose rows have their own records.
    pub fn is_summary(&self) -> bool {
        self.entity.kind == SUMMARY_KIND
    }
}

pub(crate) const SUMMARY_KIND: &str = "batch";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub id: Id,
    pub recipient_id: Id,
    pub subject: String,
    pub body: String,
    pub created_at: Timestamp,
    pub delivered: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFilter {
    pub actor_id: Option<Id>,
    pub entity_kind: Option<String>,
    pub from: Option<Timestamp>,
    pub until: Option<Timestamp>,
}

impl AuditFilter {
    pub fn matches(&self, record: &AuditRecord) -> bool {
        self.actor_id.as_ref().is_none_or(|a| record.actor_id == *a)
            && self.entity_kind.as_ref().is_none_or(|k| record.entity.kind == *k)
            && self.from.is_none_or(|t| record.at >= t)
            && self.until.is_none_or(|t| record.at <= t)
    }
}

fn require_root(state: &State, actor_id: &Id, action: PermissionAction) -> Result<()> {
    let authority = Authority::of(state, actor_id)?;
    let root = state.root().ok_or(Error::PermissionDenied)?;
    authority.require(state, action, &root.id)
}

/// Seq-ordered page of matching records.
pub fn list_audit(
    state: &State,
    actor_id: &Id,
    filter: &AuditFilter,
    offset: usize,
    limit: usize,
) -> Result<Vec<AuditRecord>> {
    require_root(state, actor_id, PermissionAction::AuditList)?;
    Ok(state
        .audit_log()
        .iter()
        .filter(|r| filter.matches(r))
        .skip(offset)
        .take(limit)
        .cloned()
        .collect())
}

pub fn show_audit(state: &State, actor_id: &Id, seq: u64) -> Result<AuditRecord> {
    require_root(state, actor_id, PermissionAction::AuditShow)?;
    let index = usize::try_from(seq).ok().and_then(|s| s.checked_sub(1));
    index
        .and_then(|i| state.audit_log().get(i))
        .cloned()
        .ok_or_else(|| Error::NotFound { kind: "audit", id: Id::new(alloc::format!("{seq}")) })
}

/// Delivery channel for notifications (mail gateway, local file, ...).
pub trait Transport {
    fn deliver(&mut self, notification: &Notification) -> Result<()>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrainReport {
    pub delivered: usize,
    pub failed: usize,
}

impl Txn<'_> {
    /// Hands every undelivered notification to `transport`, in id order.
    /// Failed deliveries stay queued for the next drain.
    pub fn drain_outbox(&mut self, transport: &mut dyn Transport) -> Result<DrainReport> {
        let pending: Vec<Notification> =
            self.notifications().values().filter(|n| !n.delivered).cloned().collect();
        let mut report = DrainReport::default();
        for mut n in pending {
            match transport.deliver(&n) {
                Ok(()) => {
                    n.delivered = true;
                    self.put(n)?;
                    report.delivered += 1;
                }
                Err(_) => report.failed += 1,
            }
        }
        Ok(report)
    }
}
