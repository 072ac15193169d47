//! Asset and location lifecycle.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::audit::EntityRef;
use crate::authz::{active_user, Authority, PermissionAction};
use crate::error::{Error, Result};
use crate::model::{
    Asset, AssetGroup, AssetKind, AssetState, AssetTypeDef, Id, Level, Location, UnitKind,
};
use crate::store::{State, Txn};
use crate::workflow::{Request, RequestKind};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewAsset {
    pub serial_number: String,
    pub type_name: String,
    pub owner_unit_id: Id,
    #[serde(default)]
    pub location_id: Option<Id>,
    #[serde(default)]
    pub properties: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewLocation {
    pub building: String,
    pub floor: String,
    pub room: String,
    pub owner_unit_id: Id,
    #[serde(default)]
    pub capacity: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationChanges {
    pub building: Option<String>,
    pub floor: Option<String>,
    pub room: Option<String>,
    pub owner_unit_id: Option<Id>,
    /// `Some(None)` clears the capacity.
    pub capacity: Option<Option<u32>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnCondition {
    Ok,
    Damaged,
}

/// Prefix of property fields in change maps and bulk files.
pub const PROPERTY_PREFIX: &str = "prop:";

/// Asset ids with every fellow group member added, first-seen order.
pub fn expand_groups(state: &State, ids: &[Id]) -> Vec<Id> {
    let mut out: Vec<Id> = Vec::new();
    for id in ids {
        let members: Vec<Id> = match state
            .assets()
            .get(id)
            .and_then(|a| a.group_id.as_ref())
            .and_then(|g| state.asset_groups().get(g))
        {
            Some(group) => core::iter::once(id.clone()).chain(group.member_asset_ids.iter().cloned()).collect(),
            None => alloc::vec![id.clone()],
        };
        for m in members {
            if !out.contains(&m) {
                out.push(m);
            }
        }
    }
    out
}

fn require_owner_unit(state: &State, unit: &Id) -> Result<()> {
    if state.unit(unit)?.kind == UnitKind::External {
        return Err(Error::InvalidHierarchy("external units never own assets".into()));
    }
    Ok(())
}

fn require_it(state: &State, actor_id: &Id) -> Result<()> {
    if active_user(state, actor_id)?.level == Level::IT {
        Ok(())
    } else {
        Err(Error::PermissionDenied)
    }
}

fn non_empty(field: &str, value: &str) -> Result<String> {
    let value = value.trim();
    if value.is_empty() {
        Err(Error::InvalidInput(format!("{field} is empty")))
    } else {
        Ok(value.to_string())
    }
}

pub fn list_assets(state: &State, actor_id: &Id) -> Result<Vec<Asset>> {
    let authority = Authority::of(state, actor_id)?;
    authority.require_anywhere(PermissionAction::AssetList)?;
    Ok(state
        .assets()
        .values()
        .filter(|a| authority.allows(state, PermissionAction::AssetList, &a.owner_unit_id))
        .cloned()
        .collect())
}

pub fn show_asset(state: &State, actor_id: &Id, asset_id: &Id) -> Result<Asset> {
    let authority = Authority::of(state, actor_id)?;
    let asset = state.asset(asset_id)?;
    authority.require(state, PermissionAction::AssetShow, &asset.owner_unit_id)?;
    Ok(asset.clone())
}

pub fn list_locations(state: &State, actor_id: &Id) -> Result<Vec<Location>> {
    let authority = Authority::of(state, actor_id)?;
    authority.require_anywhere(PermissionAction::LocationList)?;
    Ok(state
        .locations()
        .values()
        .filter(|l| authority.allows(state, PermissionAction::LocationList, &l.owner_unit_id))
        .cloned()
        .collect())
}

pub fn list_asset_groups(state: &State, actor_id: &Id) -> Result<Vec<AssetGroup>> {
    let authority = Authority::of(state, actor_id)?;
    authority.require_anywhere(PermissionAction::AssetList)?;
    Ok(state
        .asset_groups()
        .values()
        .filter(|g| {
            g.member_asset_ids.iter().filter_map(|id| state.assets().get(id)).all(|a| {
                authority.allows(state, PermissionAction::AssetList, &a.owner_unit_id)
            })
        })
        .cloned()
        .collect())
}

/// Inventory effects of an executed request.
pub(crate) fn apply_request(txn: &mut Txn<'_>, request: &Request) -> Result<Vec<Asset>> {
    let mut changed = Vec::new();
    let line_assets: Vec<(Id, Option<Id>)> = request
        .lines
        .iter()
        .filter_map(|l| l.asset_id.clone().map(|a| (a, l.location_id.clone())))
        .collect();
    let guard = |asset: &Asset, expected: AssetState| -> Result<()> {
        if asset.state == expected {
            Ok(())
        } else {
            Err(Error::InvalidState(format!(
                "asset {} is {}, expected {}",
                asset.serial_number,
                asset.state.as_str(),
                expected.as_str()
            )))
        }
    };
    match request.kind {
        RequestKind::Exception => {}
        RequestKind::Borrow | RequestKind::Reserve => {
            for (id, _) in &line_assets {
                let mut asset = txn.asset(id)?.clone();
                guard(&asset, AssetState::Available)?;
                if request.kind == RequestKind::Borrow {
                    asset.state = AssetState::Borrowed;
                    asset.holder_user_id = Some(request.requester_id.clone());
                } else {
                    asset.state = AssetState::Reserved;
                }
                txn.put(asset.clone())?;
                changed.push(asset);
            }
        }
        RequestKind::Transfer => {
            let dest = request
                .destination_unit_id
                .clone()
                .ok_or_else(|| Error::InvalidState("transfer without destination".into()))?;
            let leaving = txn.unit(&dest)?.kind == UnitKind::External;
            let ids: Vec<Id> = line_assets.iter().map(|(a, _)| a.clone()).collect();
            let target_location = line_assets.iter().find_map(|(_, loc)| loc.clone());
            for id in expand_groups(txn, &ids) {
                let mut asset = txn.asset(&id)?.clone();
                guard(&asset, AssetState::AwaitingTransfer)?;
                asset.holder_user_id = None;
                if leaving {
                    // owner is kept for the record; the asset leaves the inventory
                    asset.state = AssetState::OutOfInventory;
                } else {
                    asset.owner_unit_id = dest.clone();
                    asset.state = AssetState::Available;
                    asset.location_id = target_location.clone();
                }
                txn.put(asset.clone())?;
                changed.push(asset);
            }
        }
    }
    Ok(changed)
}

impl Txn<'_> {
    pub fn define_asset_type(
        &mut self,
        actor_id: &Id,
        name: &str,
        kind: AssetKind,
        common_properties: Vec<String>,
    ) -> Result<AssetTypeDef> {
        require_it(self, actor_id)?;
        let name = non_empty("type name", name)?;
        if self.asset_type_by_name(&name).is_some() {
            return Err(Error::DuplicateName(name));
        }
        let mut seen = BTreeSet::new();
        for p in &common_properties {
            if p.trim().is_empty() || !seen.insert(p.as_str()) {
                return Err(Error::InvalidInput(format!("property names must be unique and non-empty: {p:?}")));
            }
        }
        let def = AssetTypeDef { id: self.fresh_id("atype"), name, kind, common_properties };
        self.put(def.clone())?;
        self.record(actor_id, "asset_type.create", EntityRef::of(&def), None::<&()>, Some(&def))?;
        Ok(def)
    }

    /// Checks of [`Txn::add_asset`] without writing; shared with bulk import.
    pub(crate) fn validate_new_asset(&self, authority: &Authority, spec: &NewAsset) -> Result<Asset> {
        self.unit(&spec.owner_unit_id)?;
        authority.require(self, PermissionAction::AssetCreate, &spec.owner_unit_id)?;
        require_owner_unit(self, &spec.owner_unit_id)?;
        let ty = self
            .asset_type_by_name(spec.type_name.trim())
            .ok_or_else(|| Error::UnknownType(spec.type_name.clone()))?;
        let serial = non_empty("serial number", &spec.serial_number)?;
        if self.asset_by_serial(&serial).is_some() {
            return Err(Error::DuplicateSerial(serial));
        }
        if let Some(loc) = &spec.location_id {
            self.location(loc)?;
        }
        Ok(Asset {
            id: Id::new(""),
            serial_number: serial,
            type_id: ty.id.clone(),
            owner_unit_id: spec.owner_unit_id.clone(),
            location_id: spec.location_id.clone(),
            holder_user_id: None,
            state: AssetState::Available,
            group_id: None,
            properties: spec.properties.clone(),
        })
    }

    pub fn add_asset(&mut self, actor_id: &Id, spec: NewAsset) -> Result<Asset> {
        let authority = Authority::of(self, actor_id)?;
        let mut asset = self.validate_new_asset(&authority, &spec)?;
        asset.id = self.fresh_id("asset");
        self.put(asset.clone())?;
        self.record(actor_id, "asset.create", EntityRef::of(&asset), None::<&()>, Some(&asset))?;
        Ok(asset)
    }

    /// Applies `changes` to an in-inventory asset without writing.
    pub(crate) fn changed_asset(&self, before: &Asset, changes: &BTreeMap<String, String>) -> Result<Asset> {
        let mut after = before.clone();
        for (field, value) in changes {
            match field.as_str() {
                "serial_number" => {
                    let serial = non_empty("serial number", value)?;
                    if let Some(other) = self.asset_by_serial(&serial) {
                        if other.id != before.id {
                            return Err(Error::DuplicateSerial(serial));
                        }
                    }
                    after.serial_number = serial;
                }
                "type" => {
                    let ty = self
                        .asset_type_by_name(value.trim())
                        .ok_or_else(|| Error::UnknownType(value.clone()))?;
                    after.type_id = ty.id.clone();
                }
                f if f.starts_with(PROPERTY_PREFIX) => {
                    let name = non_empty("property name", &f[PROPERTY_PREFIX.len()..])?;
                    if value.is_empty() {
                        after.properties.remove(&name);
                    } else {
                        after.properties.insert(name, value.clone());
                    }
                }
                "id" | "type_id" | "owner_unit_id" | "location_id" | "holder_user_id" | "group_id" | "state" => {
                    return Err(Error::ImmutableField(field.clone()));
                }
                other => return Err(Error::InvalidInput(format!("unknown asset field {other}"))),
            }
        }
        Ok(after)
    }

    /// Modifies any field except identifiers. Fields are `serial_number`,
    /// `type` (by name) and `prop:<name>` (empty value removes the property).
    pub fn modify_asset(&mut self, actor_id: &Id, asset_id: &Id, changes: BTreeMap<String, String>) -> Result<Asset> {
        let authority = Authority::of(self, actor_id)?;
        let before = self.asset(asset_id)?.clone();
        authority.require(self, PermissionAction::AssetEdit, &before.owner_unit_id)?;
        if before.is_retired() {
            return Err(Error::InvalidState(format!("asset {} is out of inventory", before.serial_number)));
        }
        let after = self.changed_asset(&before, &changes)?;
        self.put(after.clone())?;
        self.record(actor_id, "asset.edit", EntityRef::of(&after), Some(&before), Some(&after))?;
        Ok(after)
    }

    /// Moves an asset between two locations of its own unit.
    pub fn transfer_direct(
        &mut self,
        actor_id: &Id,
        asset_id: &Id,
        new_location: &Id,
        new_holder: Option<&Id>,
    ) -> Result<Asset> {
        let authority = Authority::of(self, actor_id)?;
        let before = self.asset(asset_id)?.clone();
        authority.require(self, PermissionAction::AssetEdit, &before.owner_unit_id)?;
        let location = self.location(new_location)?;
        if location.owner_unit_id != before.owner_unit_id {
            return Err(Error::CrossUnitTransfer);
        }
        if before.is_retired() {
            return Err(Error::InvalidState(format!("asset {} is out of inventory", before.serial_number)));
        }
        let mut after = before.clone();
        after.location_id = Some(new_location.clone());
        if let Some(holder) = new_holder {
            if before.state != AssetState::Borrowed {
                return Err(Error::InvalidState("only borrowed assets have a holder".into()));
            }
            self.user(holder)?;
            after.holder_user_id = Some(holder.clone());
        }
        self.put(after.clone())?;
        self.record(actor_id, "asset.transfer_direct", EntityRef::of(&after), Some(&before), Some(&after))?;
        Ok(after)
    }

    pub fn return_asset(&mut self, actor_id: &Id, asset_id: &Id, condition: ReturnCondition) -> Result<Asset> {
        let authority = Authority::of(self, actor_id)?;
        let before = self.asset(asset_id)?.clone();
        authority.require(self, PermissionAction::AssetEdit, &before.owner_unit_id)?;
        if !matches!(before.state, AssetState::Borrowed | AssetState::Reserved) {
            return Err(Error::InvalidState(format!(
                "asset {} is {}, nothing to return",
                before.serial_number,
                before.state.as_str()
            )));
        }
        let mut after = before.clone();
        after.holder_user_id = None;
        after.state = match condition {
            ReturnCondition::Ok => AssetState::Available,
            ReturnCondition::Damaged => AssetState::Damaged,
        };
        self.put(after.clone())?;
        self.record(actor_id, "asset.return", EntityRef::of(&after), Some(&before), Some(&after))?;
        Ok(after)
    }

    pub fn create_location(&mut self, actor_id: &Id, spec: NewLocation) -> Result<Location> {
        require_it(self, actor_id)?;
        require_owner_unit(self, &spec.owner_unit_id)?;
        let building = non_empty("building", &spec.building)?;
        let floor = non_empty("floor", &spec.floor)?;
        let room = non_empty("room", &spec.room)?;
        if self.location_by_room(&building, &floor, &room).is_some() {
            return Err(Error::DuplicateRoom(format!("{building}-{floor}-{room}")));
        }
        let location = Location {
            id: self.fresh_id("loc"),
            building,
            floor,
            room,
            owner_unit_id: spec.owner_unit_id,
            capacity: spec.capacity,
        };
        self.put(location.clone())?;
        self.record(actor_id, "location.create", EntityRef::of(&location), None::<&()>, Some(&location))?;
        Ok(location)
    }

    /// Room structure and ownership are IT-only; capacity needs
    /// `location:edit` over the owner.
    pub fn edit_location(&mut self, actor_id: &Id, location_id: &Id, changes: LocationChanges) -> Result<Location> {
        let authority = Authority::of(self, actor_id)?;
        let before = self.location(location_id)?.clone();
        let structural = changes.building.is_some()
            || changes.floor.is_some()
            || changes.room.is_some()
            || changes.owner_unit_id.is_some();
        if structural {
            require_it(self, actor_id)?;
        } else {
            authority.require(self, PermissionAction::LocationEdit, &before.owner_unit_id)?;
        }
        let mut after = before.clone();
        if let Some(b) = &changes.building {
            after.building = non_empty("building", b)?;
        }
        if let Some(f) = &changes.floor {
            after.floor = non_empty("floor", f)?;
        }
        if let Some(r) = &changes.room {
            after.room = non_empty("room", r)?;
        }
        if let Some(owner) = changes.owner_unit_id {
            require_owner_unit(self, &owner)?;
            after.owner_unit_id = owner;
        }
        if let Some(capacity) = changes.capacity {
            after.capacity = capacity;
        }
        if let Some(other) = self.location_by_room(&after.building, &after.floor, &after.room) {
            if other.id != after.id {
                return Err(Error::DuplicateRoom(format!("{}-{}-{}", after.building, after.floor, after.room)));
            }
        }
        self.put(after.clone())?;
        self.record(actor_id, "location.edit", EntityRef::of(&after), Some(&before), Some(&after))?;
        Ok(after)
    }

    pub fn delete_location(&mut self, actor_id: &Id, location_id: &Id) -> Result<()> {
        let authority = Authority::of(self, actor_id)?;
        let location = self.location(location_id)?.clone();
        authority.require(self, PermissionAction::LocationDelete, &location.owner_unit_id)?;
        if self.assets().values().any(|a| a.location_id.as_ref() == Some(location_id)) {
            return Err(Error::LocationOccupied);
        }
        self.delete::<Location>(location_id)?;
        self.record(actor_id, "location.delete", EntityRef::of(&location), Some(&location), None::<&()>)?;
        Ok(())
    }

    pub fn group_assets(&mut self, actor_id: &Id, name: &str, asset_ids: &[Id]) -> Result<AssetGroup> {
        let authority = Authority::of(self, actor_id)?;
        let name = non_empty("group name", name)?;
        let members: BTreeSet<Id> = asset_ids.iter().cloned().collect();
        if members.is_empty() {
            return Err(Error::InvalidInput("a group needs at least one asset".into()));
        }
        let mut owner: Option<Id> = None;
        for id in &members {
            let asset = self.asset(id)?;
            match &owner {
                None => owner = Some(asset.owner_unit_id.clone()),
                Some(o) if *o != asset.owner_unit_id => return Err(Error::MixedOwnership),
                Some(_) => {}
            }
        }
        let owner = owner.expect("non-empty group");
        authority.require(self, PermissionAction::AssetEdit, &owner)?;
        for id in &members {
            if self.asset(id)?.group_id.is_some() {
                return Err(Error::AlreadyGrouped(id.clone()));
            }
        }
        let group = AssetGroup { id: self.fresh_id("agroup"), name, member_asset_ids: members };
        for id in &group.member_asset_ids {
            let mut asset = self.asset(id)?.clone();
            asset.group_id = Some(group.id.clone());
            self.put(asset)?;
        }
        self.put(group.clone())?;
        self.record(actor_id, "asset_group.create", EntityRef::of(&group), None::<&()>, Some(&group))?;
        Ok(group)
    }

    pub fn ungroup(&mut self, actor_id: &Id, group_id: &Id) -> Result<()> {
        let authority = Authority::of(self, actor_id)?;
        let group = self.get::<AssetGroup>(group_id)?.clone();
        for id in &group.member_asset_ids {
            let owner = self.asset(id)?.owner_unit_id.clone();
            authority.require(self, PermissionAction::AssetEdit, &owner)?;
        }
        for id in &group.member_asset_ids {
            let mut asset = self.asset(id)?.clone();
            asset.group_id = None;
            self.put(asset)?;
        }
        self.delete::<AssetGroup>(group_id)?;
        self.record(actor_id, "asset_group.delete", EntityRef::of(&group), Some(&group), None::<&()>)?;
        Ok(())
    }
}
