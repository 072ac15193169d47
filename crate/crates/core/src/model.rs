//! Shared domain records: the organisational tree, users, and the inventory
//! catalog (asset types, assets, groups, locations).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque identifier. Generated ids are `<prefix>-<10 digit counter>`, so
/// lexicographic order equals creation order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Id(String);

impl Id {
    pub fn new(value: impl Into<String>) -> Self {
        Id(value.into())
    }

    pub(crate) fn generated(prefix: &str, counter: u64) -> Self {
        Id(format!("{prefix}-{counter:010}"))
    }

    /// Counter embedded in a generated id.
    pub(crate) fn counter(&self) -> Option<u64> {
        let (_, digits) = self.0.rsplit_once('-')?;
        digits.parse().ok()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&self.0, f)
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Id {
    fn from(s: &str) -> Self {
        Id(String::from(s))
    }
}

impl From<String> for Id {
    fn from(s: String) -> Self {
        Id(s)
    }
}

impl AsRef<str> for Id {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Milliseconds since the Unix epoch.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    University,
    Faculty,
    Department,
    /// Destination outside the university; never owns anything.
    External,
}

impl UnitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UnitKind::University => "university",
            UnitKind::Faculty => "faculty",
            UnitKind::Department => "department",
            UnitKind::External => "external",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "university" => Ok(UnitKind::University),
            "faculty" => Ok(UnitKind::Faculty),
            "department" => Ok(UnitKind::Department),
            "external" => Ok(UnitKind::External),
            other => Err(Error::InvalidInput(format!("unknown unit kind {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrgUnit {
    pub id: Id,
    pub name: String,
    pub kind: UnitKind,
    pub parent_id: Option<Id>,
}

/// Administrative level: 0 plain user, 1 department, 2 faculty,
/// 3 university, 4 IT.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Level(u8);

impl Level {
    pub const USER: Level = Level(0);
    pub const DEPARTMENT: Level = Level(1);
    pub const FACULTY: Level = Level(2);
    pub const UNIVERSITY: Level = Level(3);
    pub const IT: Level = Level(4);

    pub const ALL: [Level; 5] = [
        Level::USER,
        Level::DEPARTMENT,
        Level::FACULTY,
        Level::UNIVERSITY,
        Level::IT,
    ];

    pub fn new(value: u8) -> Result<Self> {
        if value <= 4 {
            Ok(Level(value))
        } else {
            Err(Error::InvalidInput(format!("level {value} is outside 0..=4")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn is_admin(self) -> bool {
        self.0 >= 1
    }
}

impl TryFrom<u8> for Level {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Level::new(value)
    }
}

impl From<Level> for u8 {
    fn from(level: Level) -> u8 {
        level.0
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Salted one-way password digest, produced and verified outside this crate.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PasswordDigest(String);

impl PasswordDigest {
    pub fn new(encoded: impl Into<String>) -> Self {
        PasswordDigest(encoded.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for PasswordDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PasswordDigest(..)")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: Id,
    pub username: String,
    pub password_digest: PasswordDigest,
    pub level: Level,
    pub home_unit_id: Id,
    pub active: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    Space,
    SoftwareLicence,
    Other,
}

impl AssetKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "space" => Ok(AssetKind::Space),
            "software_licence" => Ok(AssetKind::SoftwareLicence),
            "other" => Ok(AssetKind::Other),
            other => Err(Error::InvalidInput(format!("unknown asset kind {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetTypeDef {
    pub id: Id,
    pub name: String,
    pub kind: AssetKind,
    pub common_properties: alloc::vec::Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetState {
    Available,
    Borrowed,
    Reserved,
    AwaitingTransfer,
    Damaged,
    OutOfInventory,
}

impl AssetState {
    pub const ALL: [AssetState; 6] = [
        AssetState::Available,
        AssetState::Borrowed,
        AssetState::Reserved,
        AssetState::AwaitingTransfer,
        AssetState::Damaged,
        AssetState::OutOfInventory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AssetState::Available => "available",
            AssetState::Borrowed => "borrowed",
            AssetState::Reserved => "reserved",
            AssetState::AwaitingTransfer => "awaiting_transfer",
            AssetState::Damaged => "damaged",
            AssetState::OutOfInventory => "out_of_inventory",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        AssetState::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown asset state {s}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asset {
    pub id: Id,
    pub serial_number: String,
    pub type_id: Id,
    pub owner_unit_id: Id,
    pub location_id: Option<Id>,
    pub holder_user_id: Option<Id>,
    pub state: AssetState,
    pub group_id: Option<Id>,
    pub properties: BTreeMap<String, String>,
}

impl Asset {
    pub fn is_retired(&self) -> bool {
        self.state == AssetState::OutOfInventory
    }
}

/// Assets that move together, like the parts of one computer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetGroup {
    pub id: Id,
    pub name: String,
    pub member_asset_ids: BTreeSet<Id>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub id: Id,
    pub building: String,
    pub floor: String,
    pub room: String,
    pub owner_unit_id: Id,
    pub capacity: Option<u32>,
}

impl Location {
    /// `building-room`, e.g. `H-801`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.building, self.room)
    }
}
