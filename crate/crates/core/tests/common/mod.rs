#![allow(dead_code)]

use std::collections::BTreeMap;

use uuis_core::inventory::{NewAsset, NewLocation};
use uuis_core::users::NewUser;
use uuis_core::{AssetKind, Id, Level, PasswordDigest, PermissionAction, Result, State, Store, Timestamp, Txn, UnitKind};

/// One university, two faculties with two departments each, ten users.
pub struct Fixture {
    pub store: Store,
    pub clock: u64,
    pub root: Id,
    pub f1: Id,
    pub f2: Id,
    pub d1: Id,
    pub d2: Id,
    pub d3: Id,
    pub d4: Id,
    pub users: BTreeMap<&'static str, Id>,
}

pub const USERS: [(&str, u8, &str); 10] = [
    ("it", 4, "root"),
    ("uni", 3, "root"),
    ("fa1", 2, "f1"),
    ("fa2", 2, "f2"),
    ("da1", 1, "d1"),
    ("da2", 1, "d2"),
    ("da3", 1, "d3"),
    ("da4", 1, "d4"),
    ("u1", 0, "d1"),
    ("u3", 0, "d3"),
];

impl Fixture {
    pub fn new() -> Self {
        let mut store = Store::new();
        let (root, it) = store
            .transact(Timestamp(1), |t| t.bootstrap("University", "it", PasswordDigest::new("x")))
            .unwrap();
        let it = it.id;
        let root = root.id;
        let mut fx = Fixture {
            store,
            clock: 1,
            root: root.clone(),
            f1: root.clone(),
            f2: root.clone(),
            d1: root.clone(),
            d2: root.clone(),
            d3: root.clone(),
            d4: root.clone(),
            users: BTreeMap::new(),
        };
        let unit = |fx: &mut Fixture, name: &str, kind, parent: &Id| {
            fx.tx(|t| t.create_org_unit(&it, name, kind, Some(parent))).unwrap().id
        };
        fx.f1 = unit(&mut fx, "Engineering", UnitKind::Faculty, &root);
        fx.f2 = unit(&mut fx, "Science", UnitKind::Faculty, &root);
        let (f1, f2) = (fx.f1.clone(), fx.f2.clone());
        fx.d1 = unit(&mut fx, "Computer Eng", UnitKind::Department, &f1);
        fx.d2 = unit(&mut fx, "Civil Eng", UnitKind::Department, &f1);
        fx.d3 = unit(&mut fx, "Physics", UnitKind::Department, &f2);
        fx.d4 = unit(&mut fx, "Chemistry", UnitKind::Department, &f2);
        fx.users.insert("it", it.clone());
        for (name, level, home) in USERS.iter().skip(1) {
            let home = fx.named_unit(home);
            let new = NewUser {
                username: name.to_string(),
                password_digest: PasswordDigest::new("x"),
                level: Level::new(*level).unwrap(),
                home_unit_id: home,
            };
            let user = fx.tx(|t| t.create_user(&it, new)).unwrap();
            fx.users.insert(name, user.id);
        }
        fx
    }

    pub fn named_unit(&self, name: &str) -> Id {
        match name {
            "root" => self.root.clone(),
            "f1" => self.f1.clone(),
            "f2" => self.f2.clone(),
            "d1" => self.d1.clone(),
            "d2" => self.d2.clone(),
            "d3" => self.d3.clone(),
            "d4" => self.d4.clone(),
            other => panic!("no unit {other}"),
        }
    }

    pub fn units(&self) -> Vec<Id> {
        self.store.state().org_units().keys().cloned().collect()
    }

    pub fn user(&self, name: &str) -> Id {
        self.users[name].clone()
    }

    /// Runs one transaction one millisecond after the previous one.
    pub fn tx<T>(&mut self, work: impl FnOnce(&mut Txn<'_>) -> Result<T>) -> Result<T> {
        self.clock += 1;
        self.store.transact(Timestamp(self.clock), work)
    }

    pub fn as_it<T>(&mut self, work: impl FnOnce(&mut Txn<'_>, &Id) -> Result<T>) -> Result<T> {
        let it = self.user("it");
        self.tx(|t| work(t, &it))
    }

    pub fn laptop_type(&mut self) {
        if self.store.state().asset_type_by_name("laptop").is_none() {
            self.as_it(|t, it| t.define_asset_type(it, "laptop", AssetKind::Other, vec!["ram".into()]))
                .unwrap();
        }
    }

    pub fn add_laptop(&mut self, serial: &str, owner: &Id) -> Id {
        self.laptop_type();
        let spec = NewAsset {
            serial_number: serial.to_string(),
            type_name: "laptop".into(),
            owner_unit_id: owner.clone(),
            location_id: None,
            properties: BTreeMap::from([("ram".to_string(), "16GB".to_string())]),
        };
        self.as_it(|t, it| t.add_asset(it, spec)).unwrap().id
    }

    pub fn add_room(&mut self, building: &str, room: &str, owner: &Id) -> Id {
        let spec = NewLocation {
            building: building.into(),
            floor: "1".into(),
            room: room.into(),
            owner_unit_id: owner.clone(),
            capacity: Some(30),
        };
        self.as_it(|t, it| t.create_location(it, spec)).unwrap().id
    }

    pub fn add_external(&mut self, name: &str) -> Id {
        self.as_it(|t, it| t.create_org_unit(it, name, UnitKind::External, None)).unwrap().id
    }
}

/// Level defaults, derived from the category rules rather than the library.
pub fn oracle_default_actions(level: u8) -> Vec<&'static str> {
    let all: Vec<&'static str> = PermissionAction::ALL.iter().map(|a| a.as_str()).collect();
    let noun = |a: &str| a.split(':').next().unwrap().to_string();
    let level_one: Vec<&'static str> = all
        .iter()
        .copied()
        .filter(|a| {
            ["request", "asset", "location", "search", "report"].contains(&noun(a).as_str())
                || *a == "user:list"
                || *a == "user:show"
        })
        .collect();
    match level {
        0 => vec!["request:create"],
        1 | 2 => level_one,
        3 => {
            let mut v = level_one;
            v.extend(all.iter().copied().filter(|a| noun(a) == "universityPart" || *a == "user:edit"));
            v
        }
        _ => all,
    }
}

/// Parent chain of `unit`, itself first.
pub fn oracle_chain(state: &State, unit: &Id) -> Vec<Id> {
    let mut chain = vec![unit.clone()];
    while let Some(p) = state.org_units()[chain.last().unwrap()].parent_id.clone() {
        chain.push(p);
    }
    chain
}

/// Brute force: does some (action, scope) held by `user` cover `target`?
pub fn oracle_allows(state: &State, user: &Id, action: PermissionAction, target: &Id) -> bool {
    let u = &state.users()[user];
    if !u.active {
        return false;
    }
    let root = state.root().unwrap().id.clone();
    let mut held: Vec<(String, Id)> = oracle_default_actions(u.level.get())
        .into_iter()
        .map(|a| (a.to_string(), if u.level.get() == 4 { root.clone() } else { u.home_unit_id.clone() }))
        .collect();
    for g in state.grants().values() {
        if g.grantee_id == *user && g.revoked_at.is_none() {
            held.extend(g.permissions.iter().map(|p| (p.action.as_str().to_string(), p.scope_unit_id.clone())));
        }
    }
    let external = state.org_units()[target].kind == UnitKind::External;
    let chain = oracle_chain(state, target);
    held.iter().any(|(a, scope)| {
        a == action.as_str() && (chain.contains(scope) || (external && *scope == root))
    })
}
