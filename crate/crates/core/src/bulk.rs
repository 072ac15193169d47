//! Bulk entry of assets.
//!
//! A bulk file has the columns
//! `serial_number,type,owner_unit,building,floor,room` followed by any number
//! of `prop:<name>` columns. Rows whose serial number already exists update
//! that asset; the others create new ones. The whole file is validated
//! before anything is written and a single bad row rejects the file.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::audit::{EntityRef, SUMMARY_KIND};
use crate::authz::{Authority, PermissionAction};
use crate::error::{Error, Result, RowError};
use crate::inventory::{NewAsset, PROPERTY_PREFIX};
use crate::model::{Asset, Id, UnitKind};
use crate::store::{State, Txn};

pub const FIXED_COLUMNS: [&str; 6] = ["serial_number", "type", "owner_unit", "building", "floor", "room"];
pub const MAX_ROWS: usize = 10_000;

/// Decoded bulk file: header plus data rows numbered from 1.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BulkFile {
    pub header: Vec<String>,
    pub rows: Vec<(usize, Vec<String>)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportSummary {
    pub created: usize,
    pub updated: usize,
}

enum Planned {
    Create(NewAsset),
    Update { before: Box<Asset>, after: Box<Asset> },
}

fn file_error(reason: impl Into<String>) -> Error {
    Error::ValidationFailed(alloc::vec![RowError { row: 0, column: None, reason: reason.into() }])
}

/// Property column names, in header order.
pub fn validate_header(header: &[String]) -> Result<Vec<String>> {
    let fixed_ok = header.len() >= FIXED_COLUMNS.len()
        && header.iter().zip(FIXED_COLUMNS).all(|(h, f)| h == f);
    if !fixed_ok {
        return Err(file_error(format!("header must start with {}", FIXED_COLUMNS.join(","))));
    }
    let mut props = Vec::new();
    let mut seen = BTreeSet::new();
    for column in &header[FIXED_COLUMNS.len()..] {
        let name = column
            .strip_prefix(PROPERTY_PREFIX)
            .filter(|n| !n.trim().is_empty())
            .ok_or_else(|| {
                Error::ValidationFailed(alloc::vec![RowError {
                    row: 0,
                    column: Some(column.clone()),
                    reason: "extra columns must be prop:<name>".into(),
                }])
            })?;
        if !seen.insert(name.to_string()) {
            return Err(Error::ValidationFailed(alloc::vec![RowError {
                row: 0,
                column: Some(column.clone()),
                reason: "duplicate property column".into(),
            }]));
        }
        props.push(name.to_string());
    }
    Ok(props)
}

/// Resolves an owner cell: a unit id, or a unit name shared by no other unit.
fn resolve_unit(state: &State, cell: &str) -> Option<Id> {
    let id = Id::from(cell);
    if state.org_units().contains_key(&id) {
        return Some(id);
    }
    let mut named = state.org_units().values().filter(|u| u.name == cell);
    match (named.next(), named.next()) {
        (Some(u), None) => Some(u.id.clone()),
        _ => None,
    }
}

fn plan_row(
    state: &State,
    authority: &Authority,
    props: &[String],
    row: usize,
    cells: &[String],
) -> core::result::Result<Planned, RowError> {
    let err = |column: Option<&str>, reason: String| RowError { row, column: column.map(String::from), reason };
    let cell = |i: usize| cells[i].trim();
    let serial = cell(0);
    if serial.is_empty() {
        return Err(err(Some("serial_number"), "serial number is empty".into()));
    }
    let type_name = cell(1);
    let ty = state
        .asset_type_by_name(type_name)
        .ok_or_else(|| err(Some("type"), format!("unknown asset type {type_name:?}")))?;
    let owner = resolve_unit(state, cell(2))
        .ok_or_else(|| err(Some("owner_unit"), format!("unknown unit {:?}", cell(2))))?;
    if state.unit(&owner).map(|u| u.kind) == Ok(UnitKind::External) {
        return Err(err(Some("owner_unit"), "external units never own assets".into()));
    }
    let (building, floor, room) = (cell(3), cell(4), cell(5));
    let location_id = match (building.is_empty(), floor.is_empty(), room.is_empty()) {
        (true, true, true) => None,
        (false, false, false) => Some(
            state
                .location_by_room(building, floor, room)
                .map(|l| l.id.clone())
                .ok_or_else(|| err(Some("room"), format!("no location {building}/{floor}/{room}")))?,
        ),
        _ => return Err(err(Some("building"), "building, floor and room go together".into())),
    };
    let properties: BTreeMap<String, String> = props
        .iter()
        .zip(&cells[FIXED_COLUMNS.len()..])
        .filter(|(_, v)| !v.trim().is_empty())
        .map(|(k, v)| (k.clone(), v.trim().to_string()))
        .collect();

    match state.asset_by_serial(serial) {
        Some(existing) => {
            if existing.owner_unit_id != owner {
                return Err(err(Some("owner_unit"), "changing the owner needs a transfer request".into()));
            }
            if !authority.allows(state, PermissionAction::AssetEdit, &owner) {
                return Err(err(None, "permission denied".into()));
            }
            let mut after = existing.clone();
            after.type_id = ty.id.clone();
            after.location_id = location_id;
            after.properties.extend(properties);
            Ok(Planned::Update { before: Box::new(existing.clone()), after: Box::new(after) })
        }
        None => {
            if !authority.allows(state, PermissionAction::AssetCreate, &owner) {
                return Err(err(None, "permission denied".into()));
            }
            Ok(Planned::Create(NewAsset {
                serial_number: serial.to_string(),
                type_name: ty.name.clone(),
                owner_unit_id: owner,
                location_id,
                properties,
            }))
        }
    }
}

/// Validates every row against the current state. Returns all row errors,
/// or the planned writes when there are none.
fn plan(state: &State, authority: &Authority, file: &BulkFile) -> Result<Vec<Planned>> {
    let props = validate_header(&file.header)?;
    if file.rows.is_empty() {
        return Err(file_error("no data rows"));
    }
    if file.rows.len() > MAX_ROWS {
        return Err(file_error(format!("more than {MAX_ROWS} data rows")));
    }
    let mut errors = Vec::new();
    let mut planned = Vec::new();
    let mut serials = BTreeSet::new();
    for (row, cells) in &file.rows {
        if cells.len() != file.header.len() {
            errors.push(RowError {
                row: *row,
                column: None,
                reason: format!("expected {} fields, found {}", file.header.len(), cells.len()),
            });
            continue;
        }
        if !serials.insert(cells[0].trim().to_string()) {
            errors.push(RowError {
                row: *row,
                column: Some("serial_number".into()),
                reason: "serial number repeated in file".into(),
            });
            continue;
        }
        match plan_row(state, authority, &props, *row, cells) {
            Ok(p) => planned.push(p),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(planned)
    } else {
        Err(Error::ValidationFailed(errors))
    }
}

impl Txn<'_> {
    /// All-or-nothing import. Writes one audit record per row and one
    /// summary record for the batch.
    pub fn bulk_import(&mut self, actor_id: &Id, file: &BulkFile) -> Result<ImportSummary> {
        let authority = Authority::of(self, actor_id)?;
        let planned = plan(self, &authority, file)?;
        let mut summary = ImportSummary::default();
        for step in planned {
            match step {
                Planned::Create(spec) => {
                    let mut asset = self.validate_new_asset(&authority, &spec)?;
                    asset.id = self.fresh_id("asset");
                    self.put(asset.clone())?;
                    self.record(actor_id, "asset.create", EntityRef::of(&asset), None::<&()>, Some(&asset))?;
                    summary.created += 1;
                }
                Planned::Update { before, after } => {
                    let (before, after) = (*before, *after);
                    self.put(after.clone())?;
                    self.record(actor_id, "asset.edit", EntityRef::of(&after), Some(&before), Some(&after))?;
                    summary.updated += 1;
                }
            }
        }
        let batch = EntityRef { kind: SUMMARY_KIND.to_string(), id: self.fresh_id("import") };
        let totals = json!({ "created": summary.created, "updated": summary.updated });
        self.record(actor_id, "asset.bulk_import", batch, None::<&()>, Some(&totals))?;
        Ok(summary)
    }
}
