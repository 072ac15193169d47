//! In-memory tables, transactions with rollback, unique indexes and the
//! canonical snapshot format used for backup and restore.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Deref;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::audit::{AuditRecord, EntityRef, Notification};
use crate::authz::{Grant, PermissionGroup};
use crate::error::{Error, Result};
use crate::model::{
    Asset, AssetGroup, AssetTypeDef, Id, Location, OrgUnit, Timestamp, UnitKind, User,
};
use crate::workflow::Request;

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IndexKind {
    Serial,
    Username,
    Room,
    AssetTypeName,
    PermissionGroupName,
}

pub(crate) type IndexKey = (IndexKind, String);

pub(crate) fn room_key(building: &str, floor: &str, room: &str) -> String {
    format!("{building}\u{1f}{floor}\u{1f}{room}")
}

/// Unique keys a record claims while it is stored.
pub(crate) trait Keyed {
    fn keys(&self) -> Vec<IndexKey> {
        Vec::new()
    }
}

impl Keyed for OrgUnit {}
impl Keyed for Grant {}
impl Keyed for AssetGroup {}
impl Keyed for Request {}
impl Keyed for Notification {}

impl Keyed for User {
    fn keys(&self) -> Vec<IndexKey> {
        alloc::vec![(IndexKind::Username, self.username.to_lowercase())]
    }
}

impl Keyed for PermissionGroup {
    fn keys(&self) -> Vec<IndexKey> {
        alloc::vec![(IndexKind::PermissionGroupName, self.name.clone())]
    }
}

impl Keyed for AssetTypeDef {
    fn keys(&self) -> Vec<IndexKey> {
        alloc::vec![(IndexKind::AssetTypeName, self.name.to_lowercase())]
    }
}

impl Keyed for Location {
    fn keys(&self) -> Vec<IndexKey> {
        alloc::vec![(IndexKind::Room, room_key(&self.building, &self.floor, &self.room))]
    }
}

impl Keyed for Asset {
    fn keys(&self) -> Vec<IndexKey> {
        if self.is_retired() {
            Vec::new()
        } else {
            alloc::vec![(IndexKind::Serial, self.serial_number.clone())]
        }
    }
}

/// A row type stored in one of the [`State`] tables.
pub trait Record: Clone + Serialize + Sized {
    /// Entity tag used in audit records and id prefixes.
    const TAG: &'static str;
    fn id(&self) -> &Id;
    fn table(state: &State) -> &BTreeMap<Id, Self>;
    #[doc(hidden)]
    fn table_mut(state: &mut State) -> &mut BTreeMap<Id, Self>;
    #[doc(hidden)]
    fn unique_keys(&self) -> Vec<IndexKey>;
    #[doc(hidden)]
    fn undo(id: Id, prior: Option<Self>) -> Undo;
}

macro_rules! tables {
    ($($variant:ident => $ty:ty, $field:ident, $tag:literal;)*) => {
        /// Prior value of one touched row, replayed in reverse on rollback.
        #[doc(hidden)]
        pub enum Undo {
            $($variant(Id, Option<$ty>),)*
        }

        impl Undo {
            fn revert(self, state: &mut State) {
                match self {
                    $(Undo::$variant(id, prior) => state.restore_row::<$ty>(id, prior),)*
                }
            }
        }

        $(
            impl Record for $ty {
                const TAG: &'static str = $tag;
                fn id(&self) -> &Id {
                    &self.id
                }
                fn table(state: &State) -> &BTreeMap<Id, Self> {
                    &state.$field
                }
                fn table_mut(state: &mut State) -> &mut BTreeMap<Id, Self> {
                    &mut state.$field
                }
                fn unique_keys(&self) -> Vec<IndexKey> {
                    Keyed::keys(self)
                }
                fn undo(id: Id, prior: Option<Self>) -> Undo {
                    Undo::$variant(id, prior)
                }
            }
        )*
    };
}

tables! {
    OrgUnit => OrgUnit, org_units, "org_unit";
    User => User, users, "user";
    PermissionGroup => PermissionGroup, permission_groups, "permission_group";
    Grant => Grant, grants, "grant";
    AssetType => AssetTypeDef, asset_types, "asset_type";
    Location => Location, locations, "location";
    Asset => Asset, assets, "asset";
    AssetGroup => AssetGroup, asset_groups, "asset_group";
    Request => Request, requests, "request";
    Notification => Notification, notifications, "notification";
}

/// The complete persisted state. Read freely; mutate only through [`Txn`].
#[derive(Clone, Debug, Default)]
pub struct State {
    pub(crate) org_units: BTreeMap<Id, OrgUnit>,
    pub(crate) users: BTreeMap<Id, User>,
    pub(crate) permission_groups: BTreeMap<Id, PermissionGroup>,
    pub(crate) grants: BTreeMap<Id, Grant>,
    pub(crate) asset_types: BTreeMap<Id, AssetTypeDef>,
    pub(crate) locations: BTreeMap<Id, Location>,
    pub(crate) assets: BTreeMap<Id, Asset>,
    pub(crate) asset_groups: BTreeMap<Id, AssetGroup>,
    pub(crate) requests: BTreeMap<Id, Request>,
    pub(crate) notifications: BTreeMap<Id, Notification>,
    pub(crate) audit: Vec<AuditRecord>,
    index: BTreeMap<IndexKey, Id>,
    counter: u64,
}

impl State {
    pub fn org_units(&self) -> &BTreeMap<Id, OrgUnit> {
        &self.org_units
    }
    pub fn users(&self) -> &BTreeMap<Id, User> {
        &self.users
    }
    pub fn permission_groups(&self) -> &BTreeMap<Id, PermissionGroup> {
        &self.permission_groups
    }
    pub fn grants(&self) -> &BTreeMap<Id, Grant> {
        &self.grants
    }
    pub fn asset_types(&self) -> &BTreeMap<Id, AssetTypeDef> {
        &self.asset_types
    }
    pub fn locations(&self) -> &BTreeMap<Id, Location> {
        &self.locations
    }
    pub fn assets(&self) -> &BTreeMap<Id, Asset> {
        &self.assets
    }
    pub fn asset_groups(&self) -> &BTreeMap<Id, AssetGroup> {
        &self.asset_groups
    }
    pub fn requests(&self) -> &BTreeMap<Id, Request> {
        &self.requests
    }
    pub fn notifications(&self) -> &BTreeMap<Id, Notification> {
        &self.notifications
    }
    pub fn audit_log(&self) -> &[AuditRecord] {
        &self.audit
    }

    pub fn get<T: Record>(&self, id: &Id) -> Result<&T> {
        T::table(self).get(id).ok_or_else(|| Error::not_found(T::TAG, id))
    }

    pub fn unit(&self, id: &Id) -> Result<&OrgUnit> {
        self.get(id)
    }

    pub fn user(&self, id: &Id) -> Result<&User> {
        self.get(id)
    }

    pub fn asset(&self, id: &Id) -> Result<&Asset> {
        self.get(id)
    }

    pub fn location(&self, id: &Id) -> Result<&Location> {
        self.get(id)
    }

    pub fn request(&self, id: &Id) -> Result<&Request> {
        self.get(id)
    }

    pub(crate) fn lookup(&self, kind: IndexKind, key: &str) -> Option<&Id> {
        self.index.get(&(kind, key.to_string()))
    }

    /// In-inventory asset with this serial number.
    pub fn asset_by_serial(&self, serial: &str) -> Option<&Asset> {
        self.lookup(IndexKind::Serial, serial).and_then(|id| self.assets.get(id))
    }

    pub fn user_by_username(&self, username: &str) -> Option<&User> {
        self.lookup(IndexKind::Username, &username.to_lowercase())
            .and_then(|id| self.users.get(id))
    }

    pub fn asset_type_by_name(&self, name: &str) -> Option<&AssetTypeDef> {
        self.lookup(IndexKind::AssetTypeName, &name.to_lowercase())
            .and_then(|id| self.asset_types.get(id))
    }

    pub fn location_by_room(&self, building: &str, floor: &str, room: &str) -> Option<&Location> {
        self.lookup(IndexKind::Room, &room_key(building, floor, room))
            .and_then(|id| self.locations.get(id))
    }

    /// The single University unit, if the store has been initialised.
    pub fn root(&self) -> Option<&OrgUnit> {
        self.org_units.values().find(|u| u.kind == UnitKind::University)
    }

    pub fn is_empty(&self) -> bool {
        self.org_units.is_empty()
            && self.users.is_empty()
            && self.permission_groups.is_empty()
            && self.grants.is_empty()
            && self.asset_types.is_empty()
            && self.locations.is_empty()
            && self.assets.is_empty()
            && self.asset_groups.is_empty()
            && self.requests.is_empty()
            && self.notifications.is_empty()
            && self.audit.is_empty()
    }

    /// Re-verifies every unique constraint from scratch. Returns the first
    /// key claimed by two rows.
    pub fn constraint_scan(&self) -> Result<()> {
        let mut seen: BTreeMap<IndexKey, Id> = BTreeMap::new();
        let mut claim = |keys: Vec<IndexKey>, id: &Id| -> Result<()> {
            for key in keys {
                if let Some(prev) = seen.insert(key.clone(), id.clone()) {
                    if &prev != id {
                        return Err(Error::ConstraintViolation(key.0));
                    }
                }
            }
            Ok(())
        };
        for r in self.users.values() {
            claim(r.unique_keys(), &r.id)?;
        }
        for r in self.permission_groups.values() {
            claim(r.unique_keys(), &r.id)?;
        }
        for r in self.asset_types.values() {
            claim(r.unique_keys(), &r.id)?;
        }
        for r in self.locations.values() {
            claim(r.unique_keys(), &r.id)?;
        }
        for r in self.assets.values() {
            claim(r.unique_keys(), &r.id)?;
        }
        Ok(())
    }

    fn restore_row<T: Record>(&mut self, id: Id, prior: Option<T>) {
        if let Some(current) = T::table_mut(self).remove(&id) {
            for key in current.unique_keys() {
                self.index.remove(&key);
            }
        }
        if let Some(row) = prior {
            for key in row.unique_keys() {
                self.index.insert(key, id.clone());
            }
            T::table_mut(self).insert(id, row);
        }
    }

    fn insert_row<T: Record>(&mut self, row: T) -> Result<Option<T>> {
        let id = row.id().clone();
        let new_keys = row.unique_keys();
        for key in &new_keys {
            if let Some(owner) = self.index.get(key) {
                if *owner != id {
                    return Err(Error::ConstraintViolation(key.0));
                }
            }
        }
        let prior = T::table_mut(self).remove(&id);
        if let Some(old) = &prior {
            for key in old.unique_keys() {
                self.index.remove(&key);
            }
        }
        for key in new_keys {
            self.index.insert(key, id.clone());
        }
        T::table_mut(self).insert(id, row);
        Ok(prior)
    }

    /// Timestamp of the most recent committed mutation.
    pub fn last_modified(&self) -> Timestamp {
        self.audit.iter().map(|r| r.at).max().unwrap_or_default()
    }
}

/// A unit of work. Every write is journaled; dropping the transaction
/// without [`Store::transact`] committing it restores the prior state.
pub struct Txn<'a> {
    state: &'a mut State,
    now: Timestamp,
    journal: Vec<Undo>,
    audit_len: usize,
    counter: u64,
    committed: bool,
}

impl<'a> Txn<'a> {
    fn begin(state: &'a mut State, now: Timestamp) -> Self {
        let audit_len = state.audit.len();
        let counter = state.counter;
        Txn { state, now, journal: Vec::new(), audit_len, counter, committed: false }
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }

    pub fn state(&self) -> &State {
        self.state
    }

    pub fn fresh_id(&mut self, prefix: &str) -> Id {
        self.state.counter += 1;
        Id::generated(prefix, self.state.counter)
    }

    pub fn put<T: Record>(&mut self, row: T) -> Result<()> {
        let id = row.id().clone();
        let prior = self.state.insert_row(row)?;
        self.journal.push(T::undo(id, prior));
        Ok(())
    }

    pub fn delete<T: Record>(&mut self, id: &Id) -> Result<T> {
        let row = T::table(self.state).get(id).cloned().ok_or_else(|| Error::not_found(T::TAG, id))?;
        self.state.restore_row::<T>(id.clone(), None);
        self.journal.push(T::undo(id.clone(), Some(row.clone())));
        Ok(row)
    }

    /// Appends an audit record describing a mutation of this transaction.
    pub fn record<B: Serialize, A: Serialize>(
        &mut self,
        actor: &Id,
        action: &str,
        entity: EntityRef,
        before: Option<&B>,
        after: Option<&A>,
    ) -> Result<&AuditRecord> {
        let before = before.map(snapshot_value).transpose()?;
        let after = after.map(snapshot_value).transpose()?;
        let seq = self.state.audit.last().map_or(1, |r| r.seq + 1);
        self.state.audit.push(AuditRecord {
            seq,
            at: self.now,
            actor_id: actor.clone(),
            action: action.to_string(),
            entity,
            before,
            after,
        });
        Ok(self.state.audit.last().expect("just pushed"))
    }

    /// Queues a notification for out-of-band delivery.
    pub fn enqueue(&mut self, recipient: &Id, subject: String, body: String) -> Result<Notification> {
        let notification = Notification {
            id: self.fresh_id("ntf"),
            recipient_id: recipient.clone(),
            subject,
            body,
            created_at: self.now,
            delivered: false,
        };
        self.put(notification.clone())?;
        Ok(notification)
    }

    fn rollback(&mut self) {
        while let Some(undo) = self.journal.pop() {
            undo.revert(self.state);
        }
        self.state.audit.truncate(self.audit_len);
        self.state.counter = self.counter;
    }
}

impl Deref for Txn<'_> {
    type Target = State;

    fn deref(&self) -> &State {
        self.state
    }
}

impl Drop for Txn<'_> {
    fn drop(&mut self) {
        if !self.committed {
            self.rollback();
        }
    }
}

fn snapshot_value<T: Serialize>(row: &T) -> Result<Value> {
    serde_json::to_value(row).map_err(|e| Error::InvalidInput(format!("{e}")))
}

/// Owner of the [`State`]; the only path to mutate it is [`Store::transact`].
#[derive(Clone, Debug, Default)]
pub struct Store {
    state: State,
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    /// Runs `work` and commits all of its writes, or none when it fails.
    pub fn transact<T>(
        &mut self,
        now: Timestamp,
        work: impl FnOnce(&mut Txn<'_>) -> Result<T>,
    ) -> Result<T> {
        let mut txn = Txn::begin(&mut self.state, now);
        let out = work(&mut txn)?;
        txn.committed = true;
        Ok(out)
    }

    /// Canonical snapshot document: sections in fixed order, rows ordered by
    /// id and object keys sorted, so equal states give equal bytes.
    pub fn export(&self) -> String {
        Snapshot::capture(&self.state).to_canonical_json()
    }

    /// Replaces the current state with the snapshot contents.
    pub fn restore(&mut self, document: &str, force: bool) -> Result<()> {
        if !force && !self.state.is_empty() {
            return Err(Error::NonEmptyStore);
        }
        let snapshot = Snapshot::parse(document)?;
        self.state = snapshot.into_state()?;
        Ok(())
    }

    pub fn from_snapshot(document: &str) -> Result<Self> {
        let mut store = Store::new();
        store.restore(document, false)?;
        Ok(store)
    }
}

const SECTIONS: [&str; 11] = [
    "org_units",
    "users",
    "permission_groups",
    "grants",
    "asset_types",
    "locations",
    "assets",
    "groups",
    "requests",
    "audit",
    "notifications",
];

/// Backup document.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub format_version: u32,
    pub taken_at: Timestamp,
    /// `(section name, rows)` in the fixed section order.
    pub sections: Vec<(String, Vec<Value>)>,
}

fn rows<T: Serialize>(table: impl Iterator<Item = T>) -> Vec<Value> {
    table
        .map(|row| serde_json::to_value(row).expect("domain records serialize"))
        .collect()
}

impl Snapshot {
    /// `taken_at` is the time of the last committed mutation, which keeps
    /// export after restore byte-identical.
    pub fn capture(state: &State) -> Self {
        let sections = SECTIONS
            .iter()
            .map(|name| {
                let data = match *name {
                    "org_units" => rows(state.org_units.values()),
                    "users" => rows(state.users.values()),
                    "permission_groups" => rows(state.permission_groups.values()),
                    "grants" => rows(state.grants.values()),
                    "asset_types" => rows(state.asset_types.values()),
                    "locations" => rows(state.locations.values()),
                    "assets" => rows(state.assets.values()),
                    "groups" => rows(state.asset_groups.values()),
                    "requests" => rows(state.requests.values()),
                    "audit" => rows(state.audit.iter()),
                    "notifications" => rows(state.notifications.values()),
                    _ => unreachable!(),
                };
                (name.to_string(), data)
            })
            .collect();
        Snapshot {
            format_version: SNAPSHOT_FORMAT_VERSION,
            taken_at: state.last_modified(),
            sections,
        }
    }

    pub fn to_canonical_json(&self) -> String {
        let sections: Vec<Value> = self
            .sections
            .iter()
            .map(|(name, rows)| json!({ "name": name, "rows": rows }))
            .collect();
        let doc = json!({
            "format_version": self.format_version,
            "taken_at": self.taken_at,
            "sections": sections,
        });
        let mut out = serde_json::to_string_pretty(&doc).expect("json values serialize");
        out.push('\n');
        out
    }

    pub fn parse(document: &str) -> Result<Self> {
        let malformed = |msg: &str| Error::MalformedSnapshot(msg.to_string());
        let doc: Value = serde_json::from_str(document)
            .map_err(|e| Error::MalformedSnapshot(format!("{e}")))?;
        let version = doc
            .get("format_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| malformed("missing format_version"))?;
        let version = u32::try_from(version).unwrap_or(u32::MAX);
        if version != SNAPSHOT_FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: SNAPSHOT_FORMAT_VERSION });
        }
        let taken_at = doc
            .get("taken_at")
            .and_then(Value::as_u64)
            .ok_or_else(|| malformed("missing taken_at"))?;
        let list = doc
            .get("sections")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed("missing sections"))?;
        if list.len() != SECTIONS.len() {
            return Err(malformed("unexpected number of sections"));
        }
        let mut sections = Vec::with_capacity(list.len());
        for (expected, section) in SECTIONS.iter().zip(list) {
            let name = section.get("name").and_then(Value::as_str).unwrap_or_default();
            if name != *expected {
                return Err(Error::MalformedSnapshot(format!(
                    "expected section {expected}, found {name}"
                )));
            }
            let data = section
                .get("rows")
                .and_then(Value::as_array)
                .cloned()
                .ok_or_else(|| malformed("section without rows"))?;
            sections.push((name.to_string(), data));
        }
        Ok(Snapshot { format_version: version, taken_at: Timestamp(taken_at), sections })
    }

    pub fn into_state(self) -> Result<State> {
        let mut state = State::default();
        let mut highest = 0u64;
        for (name, data) in self.sections {
            match name.as_str() {
                "org_units" => load::<OrgUnit>(&mut state, data, &mut highest)?,
                "users" => load::<User>(&mut state, data, &mut highest)?,
                "permission_groups" => load::<PermissionGroup>(&mut state, data, &mut highest)?,
                "grants" => load::<Grant>(&mut state, data, &mut highest)?,
                "asset_types" => load::<AssetTypeDef>(&mut state, data, &mut highest)?,
                "locations" => load::<Location>(&mut state, data, &mut highest)?,
                "assets" => load::<Asset>(&mut state, data, &mut highest)?,
                "groups" => load::<AssetGroup>(&mut state, data, &mut highest)?,
                "requests" => load::<Request>(&mut state, data, &mut highest)?,
                "notifications" => load::<Notification>(&mut state, data, &mut highest)?,
                "audit" => {
                    for (i, row) in data.into_iter().enumerate() {
                        let record: AuditRecord = serde_json::from_value(row)
                            .map_err(|e| Error::MalformedSnapshot(format!("audit: {e}")))?;
                        if record.seq != i as u64 + 1 {
                            return Err(Error::MalformedSnapshot("audit seq has gaps".into()));
                        }
                        state.audit.push(record);
                    }
                }
                _ => unreachable!(),
            }
        }
        state.counter = highest;
        Ok(state)
    }
}

fn load<T: Record + for<'de> Deserialize<'de>>(
    state: &mut State,
    data: Vec<Value>,
    highest: &mut u64,
) -> Result<()> {
    for row in data {
        let row: T = serde_json::from_value(row)
            .map_err(|e| Error::MalformedSnapshot(format!("{}: {e}", T::TAG)))?;
        if let Some(n) = row.id().counter() {
            *highest = (*highest).max(n);
        }
        if T::table(state).contains_key(row.id()) {
            return Err(Error::MalformedSnapshot(format!("duplicate {} id {}", T::TAG, row.id())));
        }
        state.insert_row(row)?;
    }
    Ok(())
}

impl EntityRef {
    pub fn of<T: Record>(row: &T) -> Self {
        EntityRef { kind: T::TAG.to_string(), id: row.id().clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UnitKind;

    fn unit(id: &str) -> OrgUnit {
        OrgUnit { id: Id::from(id), name: id.to_string(), kind: UnitKind::Faculty, parent_id: None }
    }

    #[test]
    fn failed_work_leaves_no_trace() {
        let mut store = Store::new();
        let before = store.export();
        let err = store
            .transact(Timestamp(5), |txn| {
                let u = unit("u1");
                txn.put(u.clone())?;
                txn.record(&Id::from("x"), "org_unit.create", EntityRef::of(&u), None::<&()>, Some(&u))?;
                Err::<(), _>(Error::PermissionDenied)
            })
            .unwrap_err();
        assert_eq!(err, Error::PermissionDenied);
        assert!(store.state().is_empty());
        assert_eq!(store.export(), before);
    }

    #[test]
    fn unique_keys_are_enforced_and_released() {
        let mut store = Store::new();
        let loc = |id: &str, room: &str| Location {
            id: Id::from(id),
            building: "H".into(),
            floor: "8".into(),
            room: room.into(),
            owner_unit_id: Id::from("d1"),
            capacity: None,
        };
        store.transact(Timestamp(1), |t| t.put(loc("l1", "801"))).unwrap();
        let err = store.transact(Timestamp(2), |t| t.put(loc("l2", "801"))).unwrap_err();
        assert_eq!(err, Error::ConstraintViolation(IndexKind::Room));
        // renaming l1 frees 801 for a new row in the same transaction
        store
            .transact(Timestamp(3), |t| {
                t.put(loc("l1", "803"))?;
                t.put(loc("l2", "801"))
            })
            .unwrap();
        assert!(store.state().location_by_room("H", "8", "801").is_some());
        store.state().constraint_scan().unwrap();
    }

    #[test]
    fn rollback_restores_index_entries() {
        let mut store = Store::new();
        let loc = Location {
            id: Id::from("l1"),
            building: "H".into(),
            floor: "8".into(),
            room: "801".into(),
            owner_unit_id: Id::from("d1"),
            capacity: None,
        };
        store.transact(Timestamp(1), |t| t.put(loc.clone())).unwrap();
        let _ = store.transact(Timestamp(2), |t| {
            t.delete::<Location>(&Id::from("l1"))?;
            Err::<(), _>(Error::LocationOccupied)
        });
        assert_eq!(store.state().location_by_room("H", "8", "801"), Some(&loc));
    }

    #[test]
    fn snapshot_rejects_other_versions() {
        let doc = Store::new().export().replace("\"format_version\": 1", "\"format_version\": 99");
        assert_eq!(
            Store::from_snapshot(&doc).unwrap_err(),
            Error::VersionMismatch { found: 99, expected: 1 }
        );
    }

    #[test]
    fn generated_ids_sort_by_creation() {
        let a = Id::generated("asset", 9);
        let b = Id::generated("asset", 10);
        assert!(a < b);
        assert_eq!(b.counter(), Some(10));
    }
}
