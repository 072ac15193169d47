//! Scoped permissions.
//!
//! A user's effective permissions are the defaults of their level, scoped at
//! their home unit, plus every live delegation they received. A permission
//! scoped at a unit covers that unit and its whole subtree. External units
//! hang off no parent; they are covered by permissions scoped at the
//! University.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audit::EntityRef;
use crate::error::{Error, Result};
use crate::model::{Id, Level, Timestamp, UnitKind, User};
use crate::store::{State, Txn};

macro_rules! actions {
    ($($variant:ident = $text:literal,)*) => {
        /// The closed permission vocabulary. Text form is `noun:verb`.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum PermissionAction {
            $($variant,)*
        }

        impl PermissionAction {
            pub const ALL: [PermissionAction; 28] = [$(PermissionAction::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(PermissionAction::$variant => $text,)*
                }
            }
        }

        impl FromStr for PermissionAction {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok(PermissionAction::$variant),)*
                    other => Err(Error::InvalidInput(format!("unknown permission {other}"))),
                }
            }
        }
    };
}

actions! {
    RequestCreate = "request:create",
    RequestList = "request:list",
    RequestShow = "request:show",
    RequestEdit = "request:edit",
    RequestApprove = "request:approve",
    AssetCreate = "asset:create",
    AssetList = "asset:list",
    AssetShow = "asset:show",
    AssetEdit = "asset:edit",
    LocationCreate = "location:create",
    LocationList = "location:list",
    LocationShow = "location:show",
    LocationEdit = "location:edit",
    LocationDelete = "location:delete",
    UniversityPartCreate = "universityPart:create",
    UniversityPartList = "universityPart:list",
    UniversityPartShow = "universityPart:show",
    UniversityPartEdit = "universityPart:edit",
    UniversityPartDelete = "universityPart:delete",
    SearchSimple = "search:simple",
    SearchAdvanced = "search:advanced",
    ReportList = "report:list",
    ReportShow = "report:show",
    UserList = "user:list",
    UserShow = "user:show",
    UserEdit = "user:edit",
    AuditList = "audit:list",
    AuditShow = "audit:show",
}

impl PermissionAction {
    /// Category prefix (`request`, `asset`, ...).
    pub fn category(self) -> &'static str {
        self.as_str().split(':').next().unwrap_or_default()
    }
}

impl fmt::Display for PermissionAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for PermissionAction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for PermissionAction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScopedPermission {
    pub action: PermissionAction,
    pub scope_unit_id: Id,
}

impl ScopedPermission {
    pub fn new(action: PermissionAction, scope: impl Into<Id>) -> Self {
        ScopedPermission { action, scope_unit_id: scope.into() }
    }
}

impl fmt::Display for ScopedPermission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.action, self.scope_unit_id)
    }
}

/// A delegation. `authority_level` is the approval level the grantee may
/// exercise through `request:approve` entries of this grant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grant {
    pub id: Id,
    pub grantor_id: Id,
    pub grantee_id: Id,
    pub permissions: BTreeSet<ScopedPermission>,
    pub authority_level: Level,
    pub created_at: Timestamp,
    pub revoked_at: Option<Timestamp>,
}

impl Grant {
    pub fn is_live(&self) -> bool {
        self.revoked_at.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermissionGroup {
    pub id: Id,
    pub name: String,
    pub actions: BTreeSet<PermissionAction>,
}

use PermissionAction::*;

const LEVEL_ONE: [PermissionAction; 20] = [
    RequestCreate,
    RequestList,
    RequestShow,
    RequestEdit,
    RequestApprove,
    AssetCreate,
    AssetList,
    AssetShow,
    AssetEdit,
    LocationCreate,
    LocationList,
    LocationShow,
    LocationEdit,
    LocationDelete,
    SearchSimple,
    SearchAdvanced,
    ReportList,
    ReportShow,
    UserList,
    UserShow,
];

const LEVEL_THREE_EXTRA: [PermissionAction; 6] = [
    UniversityPartCreate,
    UniversityPartList,
    UniversityPartShow,
    UniversityPartEdit,
    UniversityPartDelete,
    UserEdit,
];

/// Actions a level receives by default.
pub fn default_actions(level: Level) -> Vec<PermissionAction> {
    match level.get() {
        0 => alloc::vec![RequestCreate],
        1 | 2 => LEVEL_ONE.to_vec(),
        3 => LEVEL_ONE.iter().chain(LEVEL_THREE_EXTRA.iter()).copied().collect(),
        _ => PermissionAction::ALL.to_vec(),
    }
}

/// Level defaults: levels 0 to 3 are scoped at their home unit, level 4 at
/// the University root.
pub fn default_permissions(level: Level, home_unit: &Id, root: &Id) -> BTreeSet<ScopedPermission> {
    let scope = if level == Level::IT { root } else { home_unit };
    default_actions(level)
        .into_iter()
        .map(|a| ScopedPermission::new(a, scope.clone()))
        .collect()
}

/// Whether a permission scoped at `scope` applies to `target`.
pub fn scope_covers(state: &State, scope: &Id, target: &Id) -> Result<bool> {
    let target_unit = state.unit(target)?;
    let scope_unit = state.unit(scope)?;
    if target_unit.kind == UnitKind::External {
        return Ok(scope == target || scope_unit.kind == UnitKind::University);
    }
    crate::org::is_descendant(state, target, scope)
}

/// Active user or the reason they cannot act.
pub(crate) fn active_user<'s>(state: &'s State, id: &Id) -> Result<&'s User> {
    let user = state.user(id)?;
    if !user.active {
        return Err(Error::InactiveUser);
    }
    Ok(user)
}

/// Precomputed effective permissions of one user.
#[derive(Clone, Debug)]
pub struct Authority {
    pub user_id: Id,
    pub level: Level,
    pub home_unit_id: Id,
    /// Each entry with the approval level it carries.
    entries: Vec<(ScopedPermission, Level)>,
}

impl Authority {
    pub fn of(state: &State, user_id: &Id) -> Result<Self> {
        let user = active_user(state, user_id)?;
        let root = state.root().map(|u| u.id.clone()).unwrap_or_else(|| user.home_unit_id.clone());
        let mut entries: Vec<(ScopedPermission, Level)> =
            default_permissions(user.level, &user.home_unit_id, &root)
                .into_iter()
                .map(|p| (p, user.level))
                .collect();
        for grant in state.grants().values() {
            if grant.grantee_id == *user_id && grant.is_live() {
                entries.extend(grant.permissions.iter().map(|p| (p.clone(), grant.authority_level)));
            }
        }
        Ok(Authority {
            user_id: user.id.clone(),
            level: user.level,
            home_unit_id: user.home_unit_id.clone(),
            entries,
        })
    }

    pub fn permissions(&self) -> BTreeSet<ScopedPermission> {
        self.entries.iter().map(|(p, _)| p.clone()).collect()
    }

    pub fn allows(&self, state: &State, action: PermissionAction, target: &Id) -> bool {
        self.entries.iter().any(|(p, _)| {
            p.action == action && scope_covers(state, &p.scope_unit_id, target).unwrap_or(false)
        })
    }

    pub fn holds_anywhere(&self, action: PermissionAction) -> bool {
        self.entries.iter().any(|(p, _)| p.action == action)
    }

    /// `Ok(())` when allowed, `PermissionDenied` otherwise.
    pub fn require(&self, state: &State, action: PermissionAction, target: &Id) -> Result<()> {
        state.unit(target)?;
        if self.allows(state, action, target) {
            Ok(())
        } else {
            Err(Error::PermissionDenied)
        }
    }

    pub fn require_anywhere(&self, action: PermissionAction) -> Result<()> {
        if self.holds_anywhere(action) {
            Ok(())
        } else {
            Err(Error::PermissionDenied)
        }
    }

    /// Highest approval level this user can exercise over `scope`.
    pub fn approval_level(&self, state: &State, scope: &Id) -> Option<Level> {
        self.entries
            .iter()
            .filter(|(p, _)| {
                p.action == RequestApprove
                    && scope_covers(state, &p.scope_unit_id, scope).unwrap_or(false)
            })
            .map(|(_, level)| *level)
            .max()
    }

    /// Level a delegation of `permissions` carries: for each permission the
    /// best level among the entries covering it, and the weakest of those.
    fn delegation_level(&self, state: &State, permissions: &BTreeSet<ScopedPermission>) -> Level {
        permissions
            .iter()
            .filter_map(|p| {
                self.entries
                    .iter()
                    .filter(|(e, _)| {
                        e.action == p.action && scope_covers(state, &e.scope_unit_id, &p.scope_unit_id).unwrap_or(false)
                    })
                    .map(|(_, l)| *l)
                    .max()
            })
            .min()
            .unwrap_or(self.level)
    }
}

pub fn effective_permissions(state: &State, user_id: &Id) -> Result<BTreeSet<ScopedPermission>> {
    Ok(Authority::of(state, user_id)?.permissions())
}

/// Permission check. Inactive users are denied.
pub fn check(state: &State, user_id: &Id, action: PermissionAction, target: &Id) -> Result<bool> {
    state.unit(target)?;
    match Authority::of(state, user_id) {
        Ok(authority) => Ok(authority.allows(state, action, target)),
        Err(Error::InactiveUser) => Ok(false),
        Err(e) => Err(e),
    }
}

impl Txn<'_> {
    pub fn delegate(
        &mut self,
        grantor_id: &Id,
        grantee_id: &Id,
        permissions: BTreeSet<ScopedPermission>,
    ) -> Result<Grant> {
        if permissions.is_empty() {
            return Err(Error::EmptyDelegation);
        }
        let grantor = Authority::of(self, grantor_id)?;
        active_user(self, grantee_id)?;
        for p in &permissions {
            self.unit(&p.scope_unit_id)?;
            if !grantor.allows(self, p.action, &p.scope_unit_id) {
                return Err(Error::ExceedsGrantorAuthority);
            }
        }
        let authority_level = grantor.delegation_level(self, &permissions);
        let grant = Grant {
            id: self.fresh_id("grant"),
            grantor_id: grantor_id.clone(),
            grantee_id: grantee_id.clone(),
            permissions,
            authority_level,
            created_at: self.now(),
            revoked_at: None,
        };
        self.put(grant.clone())?;
        self.record(grantor_id, "grant.create", EntityRef::of(&grant), None::<&Grant>, Some(&grant))?;
        let listing: Vec<String> = grant.permissions.iter().map(|p| p.to_string()).collect();
        let grantor_name = self.user(grantor_id)?.username.clone();
        self.enqueue(
            grantee_id,
            "Permissions delegated to you".to_string(),
            format!("{grantor_name} delegated: {}", listing.join(", ")),
        )?;
        Ok(grant)
    }

    /// Revokes a grant. Revoking an already revoked grant changes nothing.
    pub fn revoke(&mut self, actor_id: &Id, grant_id: &Id) -> Result<Grant> {
        let grant: Grant = self.get::<Grant>(grant_id)?.clone();
        let actor = Authority::of(self, actor_id)?;
        let grantee_home = self.user(&grant.grantee_id)?.home_unit_id.clone();
        if grant.grantor_id != *actor_id && !actor.allows(self, UserEdit, &grantee_home) {
            return Err(Error::PermissionDenied);
        }
        if !grant.is_live() {
            return Ok(grant);
        }
        let mut revoked = grant.clone();
        revoked.revoked_at = Some(self.now());
        self.put(revoked.clone())?;
        self.record(actor_id, "grant.revoke", EntityRef::of(&revoked), Some(&grant), Some(&revoked))?;
        Ok(revoked)
    }

    pub fn create_permission_group(
        &mut self,
        actor_id: &Id,
        name: &str,
        actions: BTreeSet<PermissionAction>,
    ) -> Result<PermissionGroup> {
        let actor = active_user(self, actor_id)?;
        if actor.level != Level::IT {
            return Err(Error::PermissionDenied);
        }
        let name = name.trim();
        if name.is_empty() || actions.is_empty() {
            return Err(Error::InvalidInput("a permission group needs a name and actions".into()));
        }
        if self.permission_groups().values().any(|g| g.name == name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        let group = PermissionGroup { id: self.fresh_id("pgroup"), name: name.to_string(), actions };
        self.put(group.clone())?;
        self.record(actor_id, "permission_group.create", EntityRef::of(&group), None::<&()>, Some(&group))?;
        Ok(group)
    }

    /// Delegates every action of a permission group at one scope.
    pub fn grant_group(
        &mut self,
        actor_id: &Id,
        grantee_id: &Id,
        group_id: &Id,
        scope_unit_id: &Id,
    ) -> Result<Grant> {
        let group = self.get::<PermissionGroup>(group_id)?.clone();
        self.unit(scope_unit_id)?;
        let permissions = group
            .actions
            .iter()
            .map(|a| ScopedPermission::new(*a, scope_unit_id.clone()))
            .collect();
        self.delegate(actor_id, grantee_id, permissions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_round_trips_through_text() {
        for action in PermissionAction::ALL {
            assert_eq!(action.as_str().parse::<PermissionAction>().unwrap(), action);
        }
        assert!("request:aproval".parse::<PermissionAction>().is_err());
        assert!("asset:delete".parse::<PermissionAction>().is_err());
        assert!("".parse::<PermissionAction>().is_err());
    }

    #[test]
    fn vocabulary_is_eight_categories_of_28_actions() {
        let categories: BTreeSet<&str> = PermissionAction::ALL.iter().map(|a| a.category()).collect();
        assert_eq!(categories.len(), 8);
        let distinct: BTreeSet<_> = PermissionAction::ALL.iter().collect();
        assert_eq!(distinct.len(), 28);
    }

    #[test]
    fn level_defaults() {
        let d = Id::from("d1");
        let root = Id::from("root");
        assert_eq!(
            default_permissions(Level::USER, &d, &root),
            BTreeSet::from([ScopedPermission::new(RequestCreate, "d1")])
        );
        let one = default_permissions(Level::DEPARTMENT, &d, &root);
        assert_eq!(one.len(), 20);
        assert!(!one.iter().any(|p| p.action == UserEdit || p.action.category() == "audit"));
        assert!(!one.iter().any(|p| p.action.category() == "universityPart"));
        let three = default_actions(Level::UNIVERSITY);
        assert_eq!(three.len(), 26);
        assert!(three.contains(&UserEdit));
        assert!(!three.contains(&AuditList));
        let four = default_permissions(Level::IT, &d, &root);
        assert_eq!(four.len(), 28);
        assert!(four.contains(&ScopedPermission::new(AuditList, "root")));
    }

    #[test]
    fn serde_uses_the_text_form() {
        let p = ScopedPermission::new(RequestApprove, "d1");
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"action":"request:approve","scope_unit_id":"d1"}"#);
        assert!(serde_json::from_str::<PermissionAction>("\"asset:fly\"").is_err());
    }
}
