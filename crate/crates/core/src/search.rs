//! Simple and advanced search, the three reports, and cooperative query
//! deadlines.
//!
//! Every scan calls [`Deadline::expired`] once per row it visits and aborts
//! with [`Error::QueryTimeout`] as soon as it returns true. Rows outside the
//! units where the actor holds the matching `*:list` permission are skipped.
//! Results are ordered by the requested field, ties broken by id.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::authz::{scope_covers, Authority, PermissionAction};
use crate::error::{Error, Result};
use crate::model::{Asset, AssetState, Id, Location};
use crate::store::State;
use crate::workflow::{can_see, subject_units, Request, RequestKind, RequestStatus};

pub const DEFAULT_PAGE_LIMIT: usize = 100;
pub const MAX_PAGE_LIMIT: usize = 1000;

/// Cooperative cancellation, polled once per scanned row.
pub trait Deadline {
    fn expired(&mut self) -> bool;
}

/// Never expires.
pub struct NoDeadline;

impl Deadline for NoDeadline {
    fn expired(&mut self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Simple,
    Advanced,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchTarget {
    #[default]
    Assets,
    Locations,
    Requests,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sort {
    pub field: String,
    pub ascending: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub offset: usize,
    pub limit: usize,
}

impl Default for Page {
    fn default() -> Self {
        Page { offset: 0, limit: DEFAULT_PAGE_LIMIT }
    }
}

impl Page {
    fn clamped(self) -> Page {
        Page { offset: self.offset, limit: self.limit.clamp(1, MAX_PAGE_LIMIT) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub mode: SearchMode,
    #[serde(default)]
    pub target: SearchTarget,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub filters: BTreeMap<String, String>,
    #[serde(default)]
    pub sort: Option<Sort>,
    #[serde(default)]
    pub page: Page,
}

impl SearchQuery {
    pub fn simple(text: &str) -> Self {
        SearchQuery {
            mode: SearchMode::Simple,
            target: SearchTarget::Assets,
            text: Some(text.to_string()),
            filters: BTreeMap::new(),
            sort: None,
            page: Page::default(),
        }
    }

    pub fn advanced<'a>(filters: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        SearchQuery {
            mode: SearchMode::Advanced,
            target: SearchTarget::Assets,
            text: None,
            filters: filters.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            sort: None,
            page: Page::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchPage<T> {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub items: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum SearchResults {
    Assets(SearchPage<Asset>),
    Locations(SearchPage<Location>),
    Requests(SearchPage<Request>),
}

impl SearchResults {
    pub fn total(&self) -> usize {
        match self {
            SearchResults::Assets(p) => p.total,
            SearchResults::Locations(p) => p.total,
            SearchResults::Requests(p) => p.total,
        }
    }

    /// Ids of the returned page, in order.
    pub fn ids(&self) -> Vec<Id> {
        match self {
            SearchResults::Assets(p) => p.items.iter().map(|a| a.id.clone()).collect(),
            SearchResults::Locations(p) => p.items.iter().map(|l| l.id.clone()).collect(),
            SearchResults::Requests(p) => p.items.iter().map(|r| r.id.clone()).collect(),
        }
    }
}

/// Sort key: numbers compare numerically, everything else as text.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Num(u64),
    Text(String),
}

fn contains_ci(haystack: &str, needle_lower: &str) -> bool {
    haystack.to_lowercase().contains(needle_lower)
}

fn eq_ci(a: &str, b: &str) -> bool {
    a.to_lowercase() == b.to_lowercase()
}

fn user_matches(state: &State, user_id: &Id, needle: &str) -> bool {
    user_id.as_str() == needle || state.users().get(user_id).is_some_and(|u| eq_ci(&u.username, needle))
}

fn type_name(state: &State, asset: &Asset) -> String {
    state.asset_types().get(&asset.type_id).map(|t| t.name.clone()).unwrap_or_default()
}

fn check_filters(filters: &BTreeMap<String, String>, allowed: &[&str]) -> Result<()> {
    match filters.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::InvalidInput(format!("unknown filter {k}"))),
        None => Ok(()),
    }
}

fn check_sort(sort: &Option<Sort>, allowed: &[&str]) -> Result<()> {
    match sort {
        Some(s) if !allowed.contains(&s.field.as_str()) => {
            Err(Error::InvalidInput(format!("cannot sort by {}", s.field)))
        }
        _ => Ok(()),
    }
}

fn within(state: &State, unit: &Id, scope: &str) -> bool {
    scope_covers(state, &Id::from(scope), unit).unwrap_or(false)
}

const ASSET_FILTERS: [&str; 6] = ["serial", "type", "state", "owner_unit", "building", "holder"];
const ASSET_SORTS: [&str; 6] = ["id", "serial_number", "type", "state", "owner_unit", "location"];
const LOCATION_FILTERS: [&str; 4] = ["building", "floor", "room", "owner_unit"];
const LOCATION_SORTS: [&str; 6] = ["id", "building", "floor", "room", "owner_unit", "capacity"];
const REQUEST_FILTERS: [&str; 4] = ["status", "kind", "requester", "owner_unit"];
const REQUEST_SORTS: [&str; 5] = ["id", "created_at", "status", "kind", "requester"];

fn asset_matches(state: &State, asset: &Asset, query: &SearchQuery, needle: &str) -> Result<bool> {
    if query.mode == SearchMode::Simple {
        return Ok(contains_ci(&asset.serial_number, needle)
            || contains_ci(&type_name(state, asset), needle)
            || asset.properties.values().any(|v| contains_ci(v, needle)));
    }
    for (field, value) in &query.filters {
        let ok = match field.as_str() {
            "serial" => contains_ci(&asset.serial_number, &value.to_lowercase()),
            "type" => eq_ci(&type_name(state, asset), value),
            "state" => asset.state == AssetState::parse(value)?,
            "owner_unit" => within(state, &asset.owner_unit_id, value),
            "building" => asset
                .location_id
                .as_ref()
                .and_then(|l| state.locations().get(l))
                .is_some_and(|l| eq_ci(&l.building, value)),
            "holder" => asset.holder_user_id.as_ref().is_some_and(|h| user_matches(state, h, value)),
            _ => unreachable!("filters validated"),
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

fn asset_key(state: &State, asset: &Asset, field: &str) -> Key {
    match field {
        "serial_number" => Key::Text(asset.serial_number.clone()),
        "type" => Key::Text(type_name(state, asset)),
        "state" => Key::Text(asset.state.as_str().to_string()),
        "owner_unit" => Key::Text(asset.owner_unit_id.to_string()),
        "location" => Key::Text(
            asset
                .location_id
                .as_ref()
                .and_then(|l| state.locations().get(l))
                .map(|l| format!("{}\u{1f}{}\u{1f}{}", l.building, l.floor, l.room))
                .unwrap_or_default(),
        ),
        _ => Key::Text(asset.id.to_string()),
    }
}

fn location_matches(state: &State, loc: &Location, query: &SearchQuery, needle: &str) -> bool {
    if query.mode == SearchMode::Simple {
        return contains_ci(&loc.building, needle)
            || contains_ci(&loc.floor, needle)
            || contains_ci(&loc.room, needle)
            || contains_ci(&loc.label(), needle);
    }
    query.filters.iter().all(|(field, value)| match field.as_str() {
        "building" => eq_ci(&loc.building, value),
        "floor" => eq_ci(&loc.floor, value),
        "room" => eq_ci(&loc.room, value),
        "owner_unit" => within(state, &loc.owner_unit_id, value),
        _ => unreachable!("filters validated"),
    })
}

fn location_key(loc: &Location, field: &str) -> Key {
    match field {
        "building" => Key::Text(loc.building.clone()),
        "floor" => Key::Text(loc.floor.clone()),
        "room" => Key::Text(loc.room.clone()),
        "owner_unit" => Key::Text(loc.owner_unit_id.to_string()),
        "capacity" => Key::Num(loc.capacity.map_or(0, u64::from)),
        _ => Key::Text(loc.id.to_string()),
    }
}

fn request_matches(state: &State, req: &Request, query: &SearchQuery, needle: &str) -> Result<bool> {
    if query.mode == SearchMode::Simple {
        return Ok(contains_ci(&req.text, needle)
            || req.lines.iter().any(|l| contains_ci(&l.asset_serial, needle) || contains_ci(&l.note, needle)));
    }
    for (field, value) in &query.filters {
        let ok = match field.as_str() {
            "status" => req.status == RequestStatus::parse(value)?,
            "kind" => req.kind.as_str() == value,
            "requester" => user_matches(state, &req.requester_id, value),
            "owner_unit" => subject_units(state, req).iter().any(|u| within(state, u, value)),
            _ => unreachable!("filters validated"),
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

fn request_key(state: &State, req: &Request, field: &str) -> Key {
    match field {
        "created_at" => Key::Num(req.created_at.0),
        "status" => Key::Text(req.status.as_str().to_string()),
        "kind" => Key::Text(req.kind.as_str().to_string()),
        "requester" => Key::Text(
            state.users().get(&req.requester_id).map(|u| u.username.clone()).unwrap_or_default(),
        ),
        _ => Key::Text(req.id.to_string()),
    }
}

fn order_and_page<T>(mut hits: Vec<(Key, Id, T)>, ascending: bool, page: Page) -> SearchPage<T> {
    hits.sort_by(|a, b| {
        let primary = if ascending { a.0.cmp(&b.0) } else { b.0.cmp(&a.0) };
        primary.then_with(|| a.1.cmp(&b.1))
    });
    let total = hits.len();
    let page = page.clamped();
    let items = hits.into_iter().skip(page.offset).take(page.limit).map(|(_, _, t)| t).collect();
    SearchPage { total, offset: page.offset, limit: page.limit, items }
}

fn tick(deadline: &mut dyn Deadline) -> Result<()> {
    if deadline.expired() {
        Err(Error::QueryTimeout)
    } else {
        Ok(())
    }
}

pub fn search(state: &State, actor_id: &Id, query: &SearchQuery, deadline: &mut dyn Deadline) -> Result<SearchResults> {
    let authority = Authority::of(state, actor_id)?;
    let needle = match query.mode {
        SearchMode::Simple => {
            authority.require_anywhere(PermissionAction::SearchSimple)?;
            let text = query.text.as_deref().map(str::trim).unwrap_or_default();
            if text.is_empty() {
                return Err(Error::InvalidInput("simple search needs text".into()));
            }
            text.to_lowercase()
        }
        SearchMode::Advanced => {
            authority.require_anywhere(PermissionAction::SearchAdvanced)?;
            if query.filters.is_empty() {
                return Err(Error::InvalidInput("advanced search needs at least one filter".into()));
            }
            String::new()
        }
    };
    let (field, ascending) = match &query.sort {
        Some(s) => (s.field.as_str(), s.ascending),
        None => ("id", true),
    };
    match query.target {
        SearchTarget::Assets => {
            check_filters(&query.filters, &ASSET_FILTERS)?;
            check_sort(&query.sort, &ASSET_SORTS)?;
            let mut hits = Vec::new();
            for asset in state.assets().values() {
                tick(deadline)?;
                if authority.allows(state, PermissionAction::AssetList, &asset.owner_unit_id)
                    && asset_matches(state, asset, query, &needle)?
                {
                    hits.push((asset_key(state, asset, field), asset.id.clone(), asset.clone()));
                }
            }
            Ok(SearchResults::Assets(order_and_page(hits, ascending, query.page)))
        }
        SearchTarget::Locations => {
            check_filters(&query.filters, &LOCATION_FILTERS)?;
            check_sort(&query.sort, &LOCATION_SORTS)?;
            let mut hits = Vec::new();
            for loc in state.locations().values() {
                tick(deadline)?;
                if authority.allows(state, PermissionAction::LocationList, &loc.owner_unit_id)
                    && location_matches(state, loc, query, &needle)
                {
                    hits.push((location_key(loc, field), loc.id.clone(), loc.clone()));
                }
            }
            Ok(SearchResults::Locations(order_and_page(hits, ascending, query.page)))
        }
        SearchTarget::Requests => {
            check_filters(&query.filters, &REQUEST_FILTERS)?;
            check_sort(&query.sort, &REQUEST_SORTS)?;
            let mut hits = Vec::new();
            for req in state.requests().values() {
                tick(deadline)?;
                if can_see(state, &authority, req, PermissionAction::RequestList)
                    && request_matches(state, req, query, &needle)?
                {
                    hits.push((request_key(state, req, field), req.id.clone(), req.clone()));
                }
            }
            Ok(SearchResults::Requests(order_and_page(hits, ascending, query.page)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    AssetsByLocation,
    Requests,
    UserPermissions,
}

impl ReportKind {
    pub const ALL: [ReportKind; 3] = [ReportKind::AssetsByLocation, ReportKind::Requests, ReportKind::UserPermissions];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::AssetsByLocation => "assets_by_location",
            ReportKind::Requests => "requests",
            ReportKind::UserPermissions => "user_permissions",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown report {s}")))
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            ReportKind::AssetsByLocation => &["building", "floor", "room", "serial_number", "type", "state", "owner_unit"],
            ReportKind::Requests => &["id", "requester", "kind", "status", "progress", "created_at", "resolved_at"],
            ReportKind::UserPermissions => &["user", "level", "action", "scope"],
        }
    }

    fn filters(self) -> &'static [&'static str] {
        match self {
            ReportKind::AssetsByLocation => &["building", "state", "owner_unit", "type"],
            ReportKind::Requests => &["status", "kind", "requester"],
            ReportKind::UserPermissions => &["user", "action"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSpec {
    pub kind: ReportKind,
    #[serde(default)]
    pub filters: BTreeMap<String, String>,
    #[serde(default)]
    pub sort: Option<Sort>,
}

impl ReportSpec {
    pub fn new(kind: ReportKind) -> Self {
        ReportSpec { kind, filters: BTreeMap::new(), sort: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportTable {
    pub kind: ReportKind,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ReportTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

struct Row {
    /// Default order: location/user/creation first, then entity id.
    default_key: Vec<Key>,
    id: Id,
    cells: Vec<String>,
}

fn cell_key(cell: &str) -> Key {
    match cell.parse::<u64>() {
        Ok(n) => Key::Num(n),
        Err(_) => Key::Text(cell.to_string()),
    }
}

pub fn report(state: &State, actor_id: &Id, spec: &ReportSpec, deadline: &mut dyn Deadline) -> Result<ReportTable> {
    let authority = Authority::of(state, actor_id)?;
    authority.require_anywhere(PermissionAction::ReportShow)?;
    check_filters(&spec.filters, spec.kind.filters())?;
    let columns = spec.kind.columns();
    let sort_column = match &spec.sort {
        Some(s) => Some((
            columns
                .iter()
                .position(|c| *c == s.field)
                .ok_or_else(|| Error::InvalidInput(format!("cannot sort by {}", s.field)))?,
            s.ascending,
        )),
        None => None,
    };
    let filter = |name: &str| spec.filters.get(name).map(String::as_str);
    let mut rows: Vec<Row> = Vec::new();
    match spec.kind {
        ReportKind::AssetsByLocation => {
            for asset in state.assets().values() {
                tick(deadline)?;
                if !authority.allows(state, PermissionAction::AssetList, &asset.owner_unit_id) {
                    continue;
                }
                let loc = asset.location_id.as_ref().and_then(|l| state.locations().get(l));
                let (building, floor, room) = loc.map_or((String::new(), String::new(), String::new()), |l| {
                    (l.building.clone(), l.floor.clone(), l.room.clone())
                });
                let ty = type_name(state, asset);
                if filter("building").is_some_and(|b| !eq_ci(b, &building))
                    || filter("type").is_some_and(|t| !eq_ci(t, &ty))
                    || filter("owner_unit").is_some_and(|u| !within(state, &asset.owner_unit_id, u))
                {
                    continue;
                }
                if let Some(s) = filter("state") {
                    if asset.state != AssetState::parse(s)? {
                        continue;
                    }
                }
                rows.push(Row {
                    default_key: alloc::vec![
                        Key::Text(building.clone()),
                        Key::Text(floor.clone()),
                        Key::Text(room.clone()),
                        Key::Text(asset.serial_number.clone()),
                    ],
                    id: asset.id.clone(),
                    cells: alloc::vec![
                        building,
                        floor,
                        room,
                        asset.serial_number.clone(),
                        ty,
                        asset.state.as_str().to_string(),
                        asset.owner_unit_id.to_string(),
                    ],
                });
            }
        }
        ReportKind::Requests => {
            let kind_filter = match filter("kind") {
                Some(k) => Some(
                    [RequestKind::Borrow, RequestKind::Reserve, RequestKind::Transfer, RequestKind::Exception]
                        .into_iter()
                        .find(|x| x.as_str() == k)
                        .ok_or_else(|| Error::InvalidInput(format!("unknown request kind {k}")))?,
                ),
                None => None,
            };
            let status_filter = filter("status").map(RequestStatus::parse).transpose()?;
            for req in state.requests().values() {
                tick(deadline)?;
                if !can_see(state, &authority, req, PermissionAction::RequestList)
                    || kind_filter.is_some_and(|k| k != req.kind)
                    || status_filter.is_some_and(|s| s != req.status)
                    || filter("requester").is_some_and(|u| !user_matches(state, &req.requester_id, u))
                {
                    continue;
                }
                let requester = state.users().get(&req.requester_id).map(|u| u.username.clone()).unwrap_or_default();
                rows.push(Row {
                    default_key: alloc::vec![Key::Num(req.created_at.0)],
                    id: req.id.clone(),
                    cells: alloc::vec![
                        req.id.to_string(),
                        requester,
                        req.kind.as_str().to_string(),
                        req.status.as_str().to_string(),
                        req.progress(),
                        req.created_at.to_string(),
                        req.resolved_at.map(|t| t.to_string()).unwrap_or_default(),
                    ],
                });
            }
        }
        ReportKind::UserPermissions => {
            let action_filter = filter("action").map(str::parse::<PermissionAction>).transpose()?;
            for user in state.users().values() {
                tick(deadline)?;
                let visible = user.id == authority.user_id
                    || authority.allows(state, PermissionAction::UserList, &user.home_unit_id);
                if !visible || !user.active || filter("user").is_some_and(|u| !user_matches(state, &user.id, u)) {
                    continue;
                }
                for p in Authority::of(state, &user.id)?.permissions() {
                    if action_filter.is_some_and(|a| a != p.action) {
                        continue;
                    }
                    rows.push(Row {
                        default_key: alloc::vec![
                            Key::Text(user.username.clone()),
                            Key::Text(p.action.as_str().to_string()),
                            Key::Text(p.scope_unit_id.to_string()),
                        ],
                        id: user.id.clone(),
                        cells: alloc::vec![
                            user.username.clone(),
                            user.level.to_string(),
                            p.action.as_str().to_string(),
                            p.scope_unit_id.to_string(),
                        ],
                    });
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        let primary = match sort_column {
            Some((col, ascending)) => {
                let ord = cell_key(&a.cells[col]).cmp(&cell_key(&b.cells[col]));
                if ascending { ord } else { ord.reverse() }
            }
            None => Ordering::Equal,
        };
        primary
            .then_with(|| a.default_key.cmp(&b.default_key))
            .then_with(|| a.id.cmp(&b.id))
    });
    Ok(ReportTable {
        kind: spec.kind,
        columns: columns.iter().map(|c| c.to_string()).collect(),
        rows: rows.into_iter().map(|r| r.cells).collect(),
    })
}
