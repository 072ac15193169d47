//! University → Faculty → Department tree and its management operations.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::audit::EntityRef;
use crate::authz::{Authority, PermissionAction};
use crate::error::{Error, Result};
use crate::model::{Id, Level, OrgUnit, PasswordDigest, UnitKind, User};
use crate::store::{State, Txn};

/// True iff `ancestor` equals `unit` or lies on its parent chain.
pub fn is_descendant(state: &State, unit: &Id, ancestor: &Id) -> Result<bool> {
    state.unit(ancestor)?;
    let mut current = state.unit(unit)?;
    // the tree is at most three levels deep; the bound guards corrupt input
    for _ in 0..8 {
        if current.id == *ancestor {
            return Ok(true);
        }
        match &current.parent_id {
            Some(parent) => current = state.unit(parent)?,
            None => return Ok(false),
        }
    }
    Ok(false)
}

/// Faculty a unit belongs to: itself for a Faculty, its parent for a
/// Department, none otherwise.
pub fn faculty_of<'s>(state: &'s State, unit: &Id) -> Result<Option<&'s OrgUnit>> {
    let unit = state.unit(unit)?;
    Ok(match unit.kind {
        UnitKind::Faculty => Some(unit),
        UnitKind::Department => match &unit.parent_id {
            Some(p) => Some(state.unit(p)?),
            None => None,
        },
        UnitKind::University | UnitKind::External => None,
    })
}

/// Checks the parent/kind combination of a unit against the tree shape.
pub(crate) fn validate_placement(state: &State, kind: UnitKind, parent: Option<&Id>) -> Result<()> {
    let parent_kind = match parent {
        Some(p) => Some(state.unit(p)?.kind),
        None => None,
    };
    let ok = match (kind, parent_kind) {
        (UnitKind::University, None) => state.root().is_none(),
        (UnitKind::Faculty, Some(UnitKind::University)) => true,
        (UnitKind::Department, Some(UnitKind::Faculty)) => true,
        (UnitKind::External, None) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        let parent = parent_kind.map_or("no parent", UnitKind::as_str);
        Err(Error::InvalidHierarchy(format!("{} under {}", kind.as_str(), parent)))
    }
}

/// Depth check used after mutations: every non-external unit reaches the
/// University within three hops.
/// Units the actor may list, in id order.
pub fn list_org_units(state: &State, actor_id: &Id) -> Result<Vec<OrgUnit>> {
    let actor = Authority::of(state, actor_id)?;
    actor.require_anywhere(PermissionAction::UniversityPartList)?;
    Ok(state
        .org_units()
        .values()
        .filter(|u| actor.allows(state, PermissionAction::UniversityPartList, &u.id))
        .cloned()
        .collect())
}

pub fn verify_tree(state: &State) -> Result<()> {
    let roots = state.org_units().values().filter(|u| u.kind == UnitKind::University).count();
    if roots > 1 {
        return Err(Error::InvalidHierarchy("more than one university".into()));
    }
    for unit in state.org_units().values() {
        if unit.kind == UnitKind::External {
            if unit.parent_id.is_some() {
                return Err(Error::InvalidHierarchy("external unit with a parent".into()));
            }
            continue;
        }
        let mut current = unit;
        let mut hops = 0;
        while current.kind != UnitKind::University {
            let parent = current
                .parent_id
                .as_ref()
                .ok_or_else(|| Error::InvalidHierarchy(format!("{} is detached", unit.id)))?;
            current = state.unit(parent)?;
            hops += 1;
            if hops > 3 {
                return Err(Error::InvalidHierarchy(format!("{} is too deep", unit.id)));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitChanges {
    pub name: Option<String>,
}

impl Txn<'_> {
    /// Creates the University root and the first IT user on an empty store.
    pub fn bootstrap(
        &mut self,
        university_name: &str,
        admin_username: &str,
        admin_digest: PasswordDigest,
    ) -> Result<(OrgUnit, User)> {
        if self.root().is_some() || !self.users().is_empty() {
            return Err(Error::NonEmptyStore);
        }
        let root = OrgUnit {
            id: self.fresh_id("unit"),
            name: university_name.to_string(),
            kind: UnitKind::University,
            parent_id: None,
        };
        let admin = User {
            id: self.fresh_id("user"),
            username: admin_username.to_string(),
            password_digest: admin_digest,
            level: Level::IT,
            home_unit_id: root.id.clone(),
            active: true,
        };
        crate::users::validate_username(&admin.username)?;
        self.put(root.clone())?;
        self.put(admin.clone())?;
        self.record(&admin.id, "org_unit.create", EntityRef::of(&root), None::<&()>, Some(&root))?;
        self.record(&admin.id, "user.create", EntityRef::of(&admin), None::<&()>, Some(&admin))?;
        Ok((root, admin))
    }

    pub fn create_org_unit(
        &mut self,
        actor_id: &Id,
        name: &str,
        kind: UnitKind,
        parent_id: Option<&Id>,
    ) -> Result<OrgUnit> {
        let actor = Authority::of(self, actor_id)?;
        if let Some(p) = parent_id {
            self.unit(p)?;
        }
        let scope = match parent_id {
            Some(p) => p.clone(),
            None => self
                .root()
                .map(|r| r.id.clone())
                .ok_or_else(|| Error::InvalidHierarchy("store has no university".into()))?,
        };
        actor.require(self, PermissionAction::UniversityPartCreate, &scope)?;
        validate_placement(self, kind, parent_id)?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::InvalidInput("unit name is empty".into()));
        }
        let unit = OrgUnit {
            id: self.fresh_id("unit"),
            name: name.to_string(),
            kind,
            parent_id: parent_id.cloned(),
        };
        self.put(unit.clone())?;
        verify_tree(self)?;
        self.record(actor_id, "org_unit.create", EntityRef::of(&unit), None::<&()>, Some(&unit))?;
        Ok(unit)
    }

    pub fn edit_org_unit(&mut self, actor_id: &Id, unit_id: &Id, changes: UnitChanges) -> Result<OrgUnit> {
        let actor = Authority::of(self, actor_id)?;
        let before = self.unit(unit_id)?.clone();
        actor.require(self, PermissionAction::UniversityPartEdit, unit_id)?;
        let mut after = before.clone();
        if let Some(name) = changes.name {
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::InvalidInput("unit name is empty".into()));
            }
            after.name = name.to_string();
        }
        self.put(after.clone())?;
        self.record(actor_id, "org_unit.edit", EntityRef::of(&after), Some(&before), Some(&after))?;
        Ok(after)
    }

    pub fn delete_org_unit(&mut self, actor_id: &Id, unit_id: &Id) -> Result<()> {
        let actor = Authority::of(self, actor_id)?;
        let unit = self.unit(unit_id)?.clone();
        actor.require(self, PermissionAction::UniversityPartDelete, unit_id)?;
        if unit.kind == UnitKind::University {
            return Err(Error::InvalidHierarchy("the university cannot be deleted".into()));
        }
        let occupied = self.org_units().values().any(|u| u.parent_id.as_ref() == Some(unit_id))
            || self.assets().values().any(|a| a.owner_unit_id == *unit_id)
            || self.locations().values().any(|l| l.owner_unit_id == *unit_id)
            || self.users().values().any(|u| u.home_unit_id == *unit_id);
        if occupied {
            return Err(Error::UnitNotEmpty);
        }
        self.delete::<OrgUnit>(unit_id)?;
        self.record(actor_id, "org_unit.delete", EntityRef::of(&unit), Some(&unit), None::<&()>)?;
        Ok(())
    }
}
