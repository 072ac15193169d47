//! Request lifecycle: creation forms, approval routing, approve/reject,
//! execution hand-off and cancellation.
//!
//! ```text
//! Pending ──approve (last slot)──▶ Approved ──(same txn)──▶ AwaitingExecution ──execute──▶ Executed
//!    ├──reject──▶ Rejected
//!    └──cancel──▶ Cancelled
//! ```

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::audit::EntityRef;
use crate::authz::{Authority, PermissionAction};
use crate::error::{Error, Result};
use crate::inventory;
use crate::model::{AssetState, Id, Level, Timestamp, UnitKind};
use crate::org::faculty_of;
use crate::store::{State, Txn};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestForm {
    Basic,
    Advanced,
    Exception,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Borrow,
    Reserve,
    Transfer,
    Exception,
}

impl RequestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::Borrow => "borrow",
            RequestKind::Reserve => "reserve",
            RequestKind::Transfer => "transfer",
            RequestKind::Exception => "exception",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Pending,
    Approved,
    Rejected,
    AwaitingExecution,
    Executed,
    Cancelled,
}

impl RequestStatus {
    pub const ALL: [RequestStatus; 6] = [
        RequestStatus::Pending,
        RequestStatus::Approved,
        RequestStatus::Rejected,
        RequestStatus::AwaitingExecution,
        RequestStatus::Executed,
        RequestStatus::Cancelled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RequestStatus::Pending => "pending",
            RequestStatus::Approved => "approved",
            RequestStatus::Rejected => "rejected",
            RequestStatus::AwaitingExecution => "awaiting_execution",
            RequestStatus::Executed => "executed",
            RequestStatus::Cancelled => "cancelled",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        RequestStatus::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown request status {s}")))
    }

    /// The legal transition relation.
    pub fn can_become(self, next: RequestStatus) -> bool {
        use RequestStatus::*;
        matches!(
            (self, next),
            (Pending, Approved)
                | (Pending, Rejected)
                | (Pending, Cancelled)
                | (Approved, AwaitingExecution)
                | (AwaitingExecution, Executed)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestLine {
    #[serde(default)]
    pub asset_serial: String,
    #[serde(default)]
    pub location_id: Option<Id>,
    #[serde(default)]
    pub note: String,
    /// Asset the serial resolved to when the request was filed.
    #[serde(default)]
    pub asset_id: Option<Id>,
}

impl RequestLine {
    pub fn asset(serial: &str) -> Self {
        RequestLine { asset_serial: serial.to_string(), location_id: None, note: String::new(), asset_id: None }
    }

    pub fn location(location: &Id) -> Self {
        RequestLine {
            asset_serial: String::new(),
            location_id: Some(location.clone()),
            note: String::new(),
            asset_id: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RouteSlot {
    pub required_level: Level,
    pub scope_unit_id: Id,
}

impl RouteSlot {
    pub fn new(level: u8, scope: &Id) -> Self {
        RouteSlot { required_level: Level::new(level).expect("level in range"), scope_unit_id: scope.clone() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovalRoute {
    pub slots: Vec<RouteSlot>,
}

impl ApprovalRoute {
    pub fn empty() -> Self {
        ApprovalRoute::default()
    }

    pub fn of(slots: Vec<RouteSlot>) -> Self {
        ApprovalRoute { slots }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Approve,
    Reject,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovalRecord {
    pub approver_id: Id,
    pub slot_index: usize,
    pub decision: Decision,
    pub at: Timestamp,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: Id,
    pub requester_id: Id,
    pub form: RequestForm,
    pub kind: RequestKind,
    pub text: String,
    pub lines: Vec<RequestLine>,
    /// Receiving unit of a transfer.
    pub destination_unit_id: Option<Id>,
    pub route: ApprovalRoute,
    pub approvals: Vec<ApprovalRecord>,
    pub status: RequestStatus,
    pub created_at: Timestamp,
    pub resolved_at: Option<Timestamp>,
}

impl Request {
    pub fn is_slot_filled(&self, index: usize) -> bool {
        self.approvals.iter().any(|a| a.slot_index == index)
    }

    pub fn unfilled_slots(&self) -> impl Iterator<Item = (usize, &RouteSlot)> {
        self.route.slots.iter().enumerate().filter(|(i, _)| !self.is_slot_filled(*i))
    }

    /// `filled/total`, e.g. `1/2`.
    pub fn progress(&self) -> String {
        let filled = (0..self.route.slots.len()).filter(|i| self.is_slot_filled(*i)).count();
        format!("{}/{}", filled, self.route.slots.len())
    }

    pub fn asset_ids(&self) -> impl Iterator<Item = &Id> {
        self.lines.iter().filter_map(|l| l.asset_id.as_ref())
    }
}

/// Input of [`Txn::create_request`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewRequest {
    pub form: RequestForm,
    pub kind: RequestKind,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub lines: Vec<RequestLine>,
    #[serde(default)]
    pub destination_unit_id: Option<Id>,
}

/// Approval route of a transfer from `source` to `dest`.
///
/// * same unit: no approval
/// * two units of one faculty: source department, then the faculty; skipped
///   when the requester already holds level 2 approval authority over the
///   source
/// * different faculties: the source faculty
/// * outside the university: the university
pub fn required_approvals(state: &State, source: &Id, dest: &Id, requester: &Id) -> Result<ApprovalRoute> {
    let src = state.unit(source)?;
    let dst = state.unit(dest)?;
    let requester = Authority::of(state, requester)?;
    if src.kind == UnitKind::External {
        return Err(Error::SourceIsExternal);
    }
    let root = state.root().ok_or_else(|| Error::InvalidState("store has no university".into()))?;
    if dst.kind == UnitKind::External {
        return Ok(ApprovalRoute::of(alloc::vec![RouteSlot::new(3, &root.id)]));
    }
    if source == dest {
        return Ok(ApprovalRoute::empty());
    }
    let src_faculty = faculty_of(state, source)?;
    let dst_faculty = faculty_of(state, dest)?;
    match (src_faculty, dst_faculty) {
        (Some(a), Some(b)) if a.id == b.id => {
            let bypass = requester
                .approval_level(state, source)
                .is_some_and(|l| l >= Level::FACULTY);
            if bypass {
                return Ok(ApprovalRoute::empty());
            }
            let mut slots = Vec::new();
            if src.kind == UnitKind::Department {
                slots.push(RouteSlot::new(1, source));
            }
            slots.push(RouteSlot::new(2, &a.id));
            Ok(ApprovalRoute::of(slots))
        }
        (Some(f), _) => Ok(ApprovalRoute::of(alloc::vec![RouteSlot::new(2, &f.id)])),
        (None, _) => Ok(ApprovalRoute::of(alloc::vec![RouteSlot::new(3, &root.id)])),
    }
}

fn satisfies(state: &State, authority: &Authority, slot: &RouteSlot) -> bool {
    authority
        .approval_level(state, &slot.scope_unit_id)
        .is_some_and(|level| level >= slot.required_level)
}

/// Lowest unfilled slot `authority` may fill.
fn fillable_slot(state: &State, authority: &Authority, request: &Request) -> Option<usize> {
    request
        .unfilled_slots()
        .find(|(_, slot)| satisfies(state, authority, slot))
        .map(|(i, _)| i)
}

/// Pending requests the approver can act on.
pub fn list_pending(state: &State, approver_id: &Id) -> Result<Vec<Request>> {
    let authority = match Authority::of(state, approver_id) {
        Ok(a) => a,
        Err(Error::InactiveUser) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    Ok(state
        .requests()
        .values()
        .filter(|r| r.status == RequestStatus::Pending)
        .filter(|r| fillable_slot(state, &authority, r).is_some())
        .cloned()
        .collect())
}

/// Units a request concerns: owners of its assets and locations, else the
/// route scopes, else the requester's home.
pub fn subject_units(state: &State, request: &Request) -> Vec<Id> {
    let mut units: Vec<Id> = Vec::new();
    fn push(units: &mut Vec<Id>, id: &Id) {
        if !units.contains(id) {
            units.push(id.clone());
        }
    }
    for line in &request.lines {
        if let Some(asset) = line.asset_id.as_ref().and_then(|id| state.assets().get(id)) {
            push(&mut units, &asset.owner_unit_id);
        } else if let Some(loc) = line.location_id.as_ref().and_then(|id| state.locations().get(id)) {
            push(&mut units, &loc.owner_unit_id);
        }
    }
    if units.is_empty() {
        for slot in &request.route.slots {
            push(&mut units, &slot.scope_unit_id);
        }
    }
    if units.is_empty() {
        if let Ok(user) = state.user(&request.requester_id) {
            push(&mut units, &user.home_unit_id);
        }
    }
    units
}

/// Whether `authority` may see `request` through `action` (list or show).
/// Requesters always see their own requests.
pub fn can_see(state: &State, authority: &Authority, request: &Request, action: PermissionAction) -> bool {
    request.requester_id == authority.user_id
        || subject_units(state, request)
            .iter()
            .chain(request.route.slots.iter().map(|s| &s.scope_unit_id))
            .any(|u| authority.allows(state, action, u))
}

pub fn list_requests(state: &State, actor_id: &Id) -> Result<Vec<Request>> {
    let authority = Authority::of(state, actor_id)?;
    Ok(state
        .requests()
        .values()
        .filter(|r| can_see(state, &authority, r, PermissionAction::RequestList))
        .cloned()
        .collect())
}

pub fn show_request(state: &State, actor_id: &Id, request_id: &Id) -> Result<Request> {
    let authority = Authority::of(state, actor_id)?;
    let request = state.request(request_id)?;
    if can_see(state, &authority, request, PermissionAction::RequestShow) {
        Ok(request.clone())
    } else {
        Err(Error::PermissionDenied)
    }
}

impl Txn<'_> {
    fn set_status(&mut self, request: &mut Request, next: RequestStatus) -> Result<()> {
        if !request.status.can_become(next) {
            return Err(Error::InvalidState(format!(
                "request {} is {}, cannot become {}",
                request.id,
                request.status.as_str(),
                next.as_str()
            )));
        }
        request.status = next;
        Ok(())
    }

    /// Validates form, resolves lines and computes the route.
    fn prepare_request(&self, authority: &Authority, new: NewRequest) -> Result<(NewRequest, ApprovalRoute)> {
        let NewRequest { form, kind, text, mut lines, destination_unit_id } = new;
        if (form == RequestForm::Exception) != (kind == RequestKind::Exception) {
            return Err(Error::InvalidInput("exception requests use the exception form".into()));
        }
        if form != RequestForm::Basic
            && !authority.holds_anywhere(PermissionAction::SearchSimple)
            && !authority.holds_anywhere(PermissionAction::SearchAdvanced)
        {
            return Err(Error::PermissionDenied);
        }
        let text = text.trim().to_string();
        match form {
            RequestForm::Basic | RequestForm::Exception if text.is_empty() => return Err(Error::EmptyRequest),
            RequestForm::Advanced if lines.is_empty() => return Err(Error::EmptyRequest),
            _ => {}
        }
        if kind == RequestKind::Exception {
            lines.clear();
        }
        for line in lines.iter_mut() {
            line.asset_serial = line.asset_serial.trim().to_string();
            if let Some(loc) = &line.location_id {
                self.location(loc)?;
            }
            if line.asset_serial.is_empty() {
                if form == RequestForm::Advanced {
                    return Err(Error::InvalidInput("advanced request lines need a serial number".into()));
                }
                if line.location_id.is_none() {
                    return Err(Error::InvalidInput("request line names neither asset nor location".into()));
                }
                line.asset_id = None;
                continue;
            }
            let asset = self
                .asset_by_serial(&line.asset_serial)
                .ok_or_else(|| Error::UnknownSerial(line.asset_serial.clone()))?;
            line.asset_id = Some(asset.id.clone());
        }

        let asset_ids: Vec<Id> = lines.iter().filter_map(|l| l.asset_id.clone()).collect();
        let touched = if kind == RequestKind::Transfer {
            inventory::expand_groups(self, &asset_ids)
        } else {
            asset_ids.clone()
        };
        for id in &touched {
            let asset = self.asset(id)?;
            if asset.state != AssetState::Available {
                return Err(Error::AssetUnavailable(asset.serial_number.clone()));
            }
        }

        let route = match kind {
            RequestKind::Exception => {
                let root = self.root().ok_or_else(|| Error::InvalidState("store has no university".into()))?;
                ApprovalRoute::of(alloc::vec![RouteSlot::new(4, &root.id)])
            }
            RequestKind::Transfer => {
                let dest = destination_unit_id
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("transfer requests need a destination unit".into()))?;
                let first = asset_ids
                    .first()
                    .ok_or_else(|| Error::InvalidInput("transfer requests need at least one asset".into()))?;
                let source = self.asset(first)?.owner_unit_id.clone();
                for id in &touched {
                    if self.asset(id)?.owner_unit_id != source {
                        return Err(Error::MixedOwnership);
                    }
                }
                required_approvals(self, &source, dest, &authority.user_id)?
            }
            RequestKind::Borrow | RequestKind::Reserve => {
                let mut units: Vec<Id> = Vec::new();
                for line in &lines {
                    let owner = match (&line.asset_id, &line.location_id) {
                        (Some(a), _) => self.asset(a)?.owner_unit_id.clone(),
                        (None, Some(l)) => self.location(l)?.owner_unit_id.clone(),
                        (None, None) => continue,
                    };
                    if !units.contains(&owner) {
                        units.push(owner);
                    }
                }
                if units.is_empty() {
                    units.push(authority.home_unit_id.clone());
                }
                ApprovalRoute::of(units.iter().map(|u| RouteSlot::new(1, u)).collect())
            }
        };
        let destination_unit_id = if kind == RequestKind::Transfer { destination_unit_id } else { None };
        Ok((NewRequest { form, kind, text, lines, destination_unit_id }, route))
    }

    /// Moves a fully approved request to the execution list and notifies the
    /// requester. Transferred assets are parked in `AwaitingTransfer`.
    fn finish_approval(&mut self, request: &mut Request) -> Result<()> {
        self.set_status(request, RequestStatus::Approved)?;
        self.set_status(request, RequestStatus::AwaitingExecution)?;
        request.resolved_at = Some(self.now());
        if request.kind == RequestKind::Transfer {
            let ids: Vec<Id> = request.asset_ids().cloned().collect();
            for id in inventory::expand_groups(self, &ids) {
                let mut asset = self.asset(&id)?.clone();
                if asset.state != AssetState::Available {
                    return Err(Error::InvalidState(format!(
                        "asset {} is {}",
                        asset.serial_number,
                        asset.state.as_str()
                    )));
                }
                asset.state = AssetState::AwaitingTransfer;
                self.put(asset)?;
            }
        }
        self.enqueue(
            &request.requester_id.clone(),
            format!("Request {} approved", request.id),
            format!("Your {} request was approved and is waiting for execution.", request.kind.as_str()),
        )?;
        Ok(())
    }

    pub fn create_request(&mut self, actor_id: &Id, new: NewRequest) -> Result<Request> {
        let authority = Authority::of(self, actor_id)?;
        authority.require(self, PermissionAction::RequestCreate, &authority.home_unit_id)?;
        let (new, route) = self.prepare_request(&authority, new)?;
        let mut request = Request {
            id: self.fresh_id("req"),
            requester_id: actor_id.clone(),
            form: new.form,
            kind: new.kind,
            text: new.text,
            lines: new.lines,
            destination_unit_id: new.destination_unit_id,
            route,
            approvals: Vec::new(),
            status: RequestStatus::Pending,
            created_at: self.now(),
            resolved_at: None,
        };
        if request.route.slots.is_empty() {
            self.finish_approval(&mut request)?;
        }
        self.put(request.clone())?;
        self.record(actor_id, "request.create", EntityRef::of(&request), None::<&()>, Some(&request))?;
        Ok(request)
    }

    /// Requester edits text and lines of a pending request nobody approved yet.
    pub fn edit_request(&mut self, actor_id: &Id, request_id: &Id, text: String, lines: Vec<RequestLine>) -> Result<Request> {
        let authority = Authority::of(self, actor_id)?;
        let before = self.request(request_id)?.clone();
        if before.requester_id != *actor_id {
            return Err(Error::PermissionDenied);
        }
        if before.status != RequestStatus::Pending || !before.approvals.is_empty() {
            return Err(Error::InvalidState("only untouched pending requests can be edited".into()));
        }
        let (new, route) = self.prepare_request(
            &authority,
            NewRequest {
                form: before.form,
                kind: before.kind,
                text,
                lines,
                destination_unit_id: before.destination_unit_id.clone(),
            },
        )?;
        let mut after = before.clone();
        after.text = new.text;
        after.lines = new.lines;
        after.route = route;
        if after.route.slots.is_empty() {
            self.finish_approval(&mut after)?;
        }
        self.put(after.clone())?;
        self.record(actor_id, "request.edit", EntityRef::of(&after), Some(&before), Some(&after))?;
        Ok(after)
    }

    fn decide(&mut self, approver_id: &Id, request_id: &Id, note: &str, decision: Decision) -> Result<Request> {
        let before = self.request(request_id)?.clone();
        if before.status != RequestStatus::Pending {
            return Err(Error::InvalidState(format!(
                "request {} is {}",
                before.id,
                before.status.as_str()
            )));
        }
        let authority = Authority::of(self, approver_id)?;
        let slot = fillable_slot(self, &authority, &before).ok_or(Error::PermissionDenied)?;
        let mut after = before.clone();
        after.approvals.push(ApprovalRecord {
            approver_id: approver_id.clone(),
            slot_index: slot,
            decision,
            at: self.now(),
            note: note.to_string(),
        });
        let action = match decision {
            Decision::Approve => {
                if after.unfilled_slots().next().is_none() {
                    self.finish_approval(&mut after)?;
                }
                "request.approve"
            }
            Decision::Reject => {
                self.set_status(&mut after, RequestStatus::Rejected)?;
                after.resolved_at = Some(self.now());
                let body = if note.is_empty() {
                    format!("Your {} request was rejected.", after.kind.as_str())
                } else {
                    format!("Your {} request was rejected: {note}", after.kind.as_str())
                };
                self.enqueue(&after.requester_id.clone(), format!("Request {} rejected", after.id), body)?;
                "request.reject"
            }
        };
        self.put(after.clone())?;
        self.record(approver_id, action, EntityRef::of(&after), Some(&before), Some(&after))?;
        Ok(after)
    }

    /// Fills the lowest unfilled slot the approver satisfies.
    pub fn approve(&mut self, approver_id: &Id, request_id: &Id, note: &str) -> Result<Request> {
        self.decide(approver_id, request_id, note, Decision::Approve)
    }

    /// Rejection by any eligible slot holder is final.
    pub fn reject(&mut self, approver_id: &Id, request_id: &Id, note: &str) -> Result<Request> {
        self.decide(approver_id, request_id, note, Decision::Reject)
    }

    /// Confirms the hand-over and applies the inventory effects.
    pub fn mark_executed(&mut self, actor_id: &Id, request_id: &Id) -> Result<Request> {
        let before = self.request(request_id)?.clone();
        if before.status != RequestStatus::AwaitingExecution {
            return Err(Error::InvalidState(format!(
                "request {} is {}",
                before.id,
                before.status.as_str()
            )));
        }
        let authority = Authority::of(self, actor_id)?;
        for unit in subject_units(self, &before) {
            authority.require(self, PermissionAction::AssetEdit, &unit)?;
        }
        let mut after = before.clone();
        self.set_status(&mut after, RequestStatus::Executed)?;
        inventory::apply_request(self, &after)?;
        self.put(after.clone())?;
        self.record(actor_id, "request.execute", EntityRef::of(&after), Some(&before), Some(&after))?;
        Ok(after)
    }

    pub fn cancel(&mut self, actor_id: &Id, request_id: &Id) -> Result<Request> {
        let before = self.request(request_id)?.clone();
        if before.requester_id != *actor_id {
            return Err(Error::PermissionDenied);
        }
        let mut after = before.clone();
        self.set_status(&mut after, RequestStatus::Cancelled)?;
        after.resolved_at = Some(self.now());
        self.put(after.clone())?;
        self.record(actor_id, "request.cancel", EntityRef::of(&after), Some(&before), Some(&after))?;
        Ok(after)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_relation_matches_the_lifecycle() {
        use RequestStatus::*;
        let legal = [
            (Pending, Approved),
            (Pending, Rejected),
            (Pending, Cancelled),
            (Approved, AwaitingExecution),
            (AwaitingExecution, Executed),
        ];
        for from in RequestStatus::ALL {
            for to in RequestStatus::ALL {
                assert_eq!(from.can_become(to), legal.contains(&(from, to)), "{from:?} -> {to:?}");
            }
        }
    }

    #[test]
    fn progress_counts_filled_slots() {
        let mut r = Request {
            id: Id::from("r"),
            requester_id: Id::from("u"),
            form: RequestForm::Basic,
            kind: RequestKind::Transfer,
            text: "t".into(),
            lines: Vec::new(),
            destination_unit_id: None,
            route: ApprovalRoute::of(alloc::vec![RouteSlot::new(1, &Id::from("d")), RouteSlot::new(2, &Id::from("f"))]),
            approvals: Vec::new(),
            status: RequestStatus::Pending,
            created_at: Timestamp(0),
            resolved_at: None,
        };
        assert_eq!(r.progress(), "0/2");
        r.approvals.push(ApprovalRecord {
            approver_id: Id::from("a"),
            slot_index: 0,
            decision: Decision::Approve,
            at: Timestamp(1),
            note: String::new(),
        });
        assert_eq!(r.progress(), "1/2");
        assert_eq!(r.unfilled_slots().map(|(i, _)| i).collect::<Vec<_>>(), alloc::vec![1]);
    }
}
