//! User accounts.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::audit::EntityRef;
use crate::authz::{Authority, PermissionAction};
use crate::error::{Error, Result};
use crate::model::{Id, Level, PasswordDigest, UnitKind, User};
use crate::store::{State, Txn};

pub(crate) fn validate_username(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name.len() <= 64
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-' | '@'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("invalid username {name:?}")))
    }
}

/// Home unit kind required by each level.
pub fn validate_home(state: &State, level: Level, home: &Id) -> Result<()> {
    let kind = state.unit(home)?.kind;
    let ok = match level.get() {
        0 => kind != UnitKind::External,
        1 => kind == UnitKind::Department,
        2 => kind == UnitKind::Faculty,
        3 => kind == UnitKind::University,
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "a level {level} user cannot be homed in a {} unit",
            kind.as_str()
        )))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewUser {
    pub username: String,
    pub password_digest: PasswordDigest,
    pub level: Level,
    pub home_unit_id: Id,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserChanges {
    pub level: Option<Level>,
    pub home_unit_id: Option<Id>,
    pub active: Option<bool>,
    pub password_digest: Option<PasswordDigest>,
}

/// Users whose home unit the actor may list, plus the actor.
pub fn visible_users(state: &State, actor_id: &Id) -> Result<Vec<User>> {
    let actor = Authority::of(state, actor_id)?;
    actor.require_anywhere(PermissionAction::UserList)?;
    Ok(state
        .users()
        .values()
        .filter(|u| u.id == *actor_id || actor.allows(state, PermissionAction::UserList, &u.home_unit_id))
        .cloned()
        .collect())
}

pub fn show_user(state: &State, actor_id: &Id, user_id: &Id) -> Result<User> {
    let actor = Authority::of(state, actor_id)?;
    let user = state.user(user_id)?;
    if user.id != *actor_id {
        actor.require(state, PermissionAction::UserShow, &user.home_unit_id)?;
    }
    Ok(user.clone())
}

impl Txn<'_> {
    /// Creates an account. The actor needs `user:edit` over the new home unit
    /// and cannot create a user above their own level.
    pub fn create_user(&mut self, actor_id: &Id, new: NewUser) -> Result<User> {
        let actor = Authority::of(self, actor_id)?;
        actor.require(self, PermissionAction::UserEdit, &new.home_unit_id)?;
        if new.level > actor.level {
            return Err(Error::PermissionDenied);
        }
        validate_username(&new.username)?;
        validate_home(self, new.level, &new.home_unit_id)?;
        if self.user_by_username(&new.username).is_some() {
            return Err(Error::DuplicateName(new.username));
        }
        let user = User {
            id: self.fresh_id("user"),
            username: new.username,
            password_digest: new.password_digest,
            level: new.level,
            home_unit_id: new.home_unit_id,
            active: true,
        };
        self.put(user.clone())?;
        self.record(actor_id, "user.create", EntityRef::of(&user), None::<&()>, Some(&user))?;
        Ok(user)
    }

    /// Changes level, home, activation or password. Users may change their
    /// own password without further permission.
    pub fn update_user(&mut self, actor_id: &Id, user_id: &Id, changes: UserChanges) -> Result<User> {
        let actor = Authority::of(self, actor_id)?;
        let before = self.user(user_id)?.clone();
        let password_only = changes.level.is_none()
            && changes.home_unit_id.is_none()
            && changes.active.is_none();
        if !(password_only && actor_id == user_id) {
            actor.require(self, PermissionAction::UserEdit, &before.home_unit_id)?;
            if before.level > actor.level {
                return Err(Error::PermissionDenied);
            }
        }
        let mut after = before.clone();
        if let Some(level) = changes.level {
            if level > actor.level {
                return Err(Error::PermissionDenied);
            }
            after.level = level;
        }
        if let Some(home) = changes.home_unit_id {
            actor.require(self, PermissionAction::UserEdit, &home)?;
            after.home_unit_id = home;
        }
        if let Some(active) = changes.active {
            after.active = active;
        }
        if let Some(digest) = changes.password_digest {
            after.password_digest = digest;
        }
        validate_home(self, after.level, &after.home_unit_id)?;
        self.put(after.clone())?;
        self.record(actor_id, "user.edit", EntityRef::of(&after), Some(&before), Some(&after))?;
        Ok(after)
    }
}
