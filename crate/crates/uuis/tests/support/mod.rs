#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::net::{IpAddr, SocketAddr};
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::ConnectInfo;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;
use uuis::app::App;
use uuis::clock::ManualClock;
use uuis::config::Config;
use uuis::password::Hasher;
use uuis::persist::FileStore;
use uuis_core::inventory::NewAsset;
use uuis_core::users::NewUser;
use uuis_core::{AssetKind, Id, Level, State, UnitKind};

pub const FAST: Hasher = Hasher { iterations: 1_000 };

/// The eight categories of the permission vocabulary, written out.
pub const CATEGORIES: [(&str, &[&str]); 8] = [
    ("request", &["create", "list", "show", "edit", "approve"]),
    ("asset", &["create", "list", "show", "edit"]),
    ("location", &["create", "list", "show", "edit", "delete"]),
    ("universityPart", &["create", "list", "show", "edit", "delete"]),
    ("search", &["simple", "advanced"]),
    ("report", &["list", "show"]),
    ("user", &["list", "show", "edit"]),
    ("audit", &["list", "show"]),
];

pub fn vocabulary() -> Vec<String> {
    CATEGORIES.iter().flat_map(|(c, verbs)| verbs.iter().map(move |v| format!("{c}:{v}"))).collect()
}

/// Level defaults derived from the category description: level 0 creates
/// requests; 1 and 2 get categories request, asset, location, search,
/// report plus user:list/show; 3 adds universityPart and user:edit; 4 gets
/// everything.
pub fn oracle_default_actions(level: u8) -> BTreeSet<String> {
    let all = vocabulary();
    match level {
        0 => BTreeSet::from(["request:create".to_string()]),
        1 | 2 => all
            .into_iter()
            .filter(|a| {
                let cat = a.split(':').next().unwrap();
                ["request", "asset", "location", "search", "report"].contains(&cat)
                    || a == "user:list"
                    || a == "user:show"
            })
            .collect(),
        3 => all
            .into_iter()
            .filter(|a| !a.starts_with("audit:"))
            .collect(),
        _ => all.into_iter().collect(),
    }
}

/// Every unit reachable downwards from `scope`, by breadth-first walk.
pub fn oracle_subtree(state: &State, scope: &Id) -> BTreeSet<Id> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([scope.clone()]);
    while let Some(u) = queue.pop_front() {
        if !seen.insert(u.clone()) {
            continue;
        }
        for child in state.org_units().values().filter(|c| c.parent_id.as_ref() == Some(&u)) {
            queue.push_back(child.id.clone());
        }
    }
    seen
}

pub fn oracle_covers(state: &State, scope: &Id, target: &Id) -> bool {
    let t = &state.org_units()[target];
    if t.kind == UnitKind::External {
        return scope == target || state.org_units()[scope].kind == UnitKind::University;
    }
    oracle_subtree(state, scope).contains(target)
}

/// Scoped permissions of a user, straight from the stored rows.
pub fn oracle_permissions(state: &State, user: &Id) -> Vec<(String, Id)> {
    let u = &state.users()[user];
    if !u.active {
        return Vec::new();
    }
    let root = state.org_units().values().find(|x| x.kind == UnitKind::University).unwrap().id.clone();
    let scope = if u.level.get() == 4 { root } else { u.home_unit_id.clone() };
    let mut out: Vec<(String, Id)> =
        oracle_default_actions(u.level.get()).into_iter().map(|a| (a, scope.clone())).collect();
    for g in state.grants().values() {
        if g.grantee_id == *user && g.revoked_at.is_none() {
            out.extend(g.permissions.iter().map(|p| (p.action.as_str().to_string(), p.scope_unit_id.clone())));
        }
    }
    out
}

pub fn oracle_allows(state: &State, user: &Id, action: &str, target: &Id) -> bool {
    oracle_permissions(state, user).iter().any(|(a, s)| a == action && oracle_covers(state, s, target))
}

pub fn oracle_allows_anywhere(state: &State, user: &Id, action: &str) -> bool {
    oracle_permissions(state, user).iter().any(|(a, _)| a == action)
}

pub fn password_of(name: &str) -> String {
    format!("{name}-secret")
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

pub struct World {
    pub app: Arc<App>,
    pub router: Router,
    pub clock: ManualClock,
    pub dir: TempDir,
    pub units: BTreeMap<&'static str, Id>,
    pub users: BTreeMap<&'static str, Id>,
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub bytes: Bytes,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes)
            .unwrap_or_else(|e| panic!("body is not JSON ({e}): {}", String::from_utf8_lossy(&self.bytes)))
    }
}

impl World {
    pub fn new() -> Self {
        Self::configured(|_| {}, |a| a)
    }

    /// Builds the 1 university / 2 faculties / 4 departments / 10 users tree
    /// in a fresh file-backed store.
    pub fn configured(edit: impl FnOnce(&mut Config), wrap: impl FnOnce(App) -> App) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut config = Config { store_path: dir.path().join("store.json"), ..Config::default() };
        edit(&mut config);
        let clock = ManualClock::at(1_000);
        let store = FileStore::open(&config.store_path).unwrap();
        let app = App::new(store, config).with_clock(Arc::new(clock.clone())).with_hasher(FAST);
        let app = Arc::new(wrap(app));
        let mut units = BTreeMap::new();
        let mut users = BTreeMap::new();
        let it = app
            .mutate(|t| t.bootstrap("University", "it", FAST.hash(&password_of("it"))))
            .map(|(root, it)| {
                units.insert("root", root.id);
                it.id
            })
            .unwrap();
        users.insert("it", it.clone());
        for (key, name, kind, parent) in [
            ("f1", "Engineering", UnitKind::Faculty, "root"),
            ("d1", "Computer Eng", UnitKind::Department, "f1"),
            ("d2", "Civil Eng", UnitKind::Department, "f1"),
            ("f2", "Science", UnitKind::Faculty, "root"),
            ("d3", "Physics", UnitKind::Department, "f2"),
            ("d4", "Chemistry", UnitKind::Department, "f2"),
        ] {
            let p = units[parent].clone();
            let u = app.mutate(|t| t.create_org_unit(&it, name, kind, Some(&p))).unwrap();
            units.insert(key, u.id);
        }
        for (name, level, home) in USERS.iter().skip(1) {
            let new = NewUser {
                username: name.to_string(),
                password_digest: FAST.hash(&password_of(name)),
                level: Level::new(*level).unwrap(),
                home_unit_id: units[home].clone(),
            };
            let u = app.mutate(|t| t.create_user(&it, new)).unwrap();
            users.insert(*name, u.id);
        }
        app.mutate(|t| t.define_asset_type(&it, "laptop", AssetKind::Other, vec!["ram".into()])).unwrap();
        let router = uuis::api::router(app.clone());
        World { app, router, clock, dir, units, users }
    }

    /// A harness around an existing app; no units or users are named.
    pub fn wrap(app: Arc<App>) -> Self {
        let router = uuis::api::router(app.clone());
        World {
            app,
            router,
            clock: ManualClock::at(0),
            dir: tempfile::tempdir().unwrap(),
            units: BTreeMap::new(),
            users: BTreeMap::new(),
        }
    }

    pub fn unit(&self, key: &str) -> Id {
        self.units[key].clone()
    }

    pub fn user(&self, key: &str) -> Id {
        self.users[key].clone()
    }

    pub fn add_laptop(&self, serial: &str, owner: &str) -> Id {
        let it = self.user("it");
        let spec = NewAsset {
            serial_number: serial.into(),
            type_name: "laptop".into(),
            owner_unit_id: self.unit(owner),
            location_id: None,
            properties: BTreeMap::from([("ram".to_string(), "16GB".to_string())]),
        };
        self.app.mutate(|t| t.add_asset(&it, spec)).unwrap().id
    }

    pub async fn send(&self, method: Method, uri: &str, token: Option<&str>, body: Body, from: Option<IpAddr>, headers: &[(&str, &str)]) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let mut req = req.body(body).unwrap();
        if let Some(ip) = from {
            req.extensions_mut().insert(ConnectInfo(SocketAddr::new(ip, 40_000)));
        }
        let res = self.router.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let headers = res.headers().clone();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        Reply { status, headers, bytes }
    }

    pub async fn call(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> Reply {
        let body = match body {
            Some(v) => Body::from(serde_json::to_vec(&v).unwrap()),
            None => Body::empty(),
        };
        self.send(method, uri, token, body, None, &[("content-type", "application/json")]).await
    }

    pub async fn login(&self, name: &str) -> String {
        self.login_as(name, &password_of(name)).await
    }

    pub async fn login_as(&self, name: &str, password: &str) -> String {
        let r = self
            .call(
                Method::POST,
                "/api/sessions",
                None,
                Some(serde_json::json!({ "username": name, "password": password })),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "login {name}: {}", String::from_utf8_lossy(&r.bytes));
        r.json()["token"].as_str().unwrap().to_string()
    }

    pub fn outbox_lines(&self) -> Vec<Value> {
        let path = self.dir.path().join("store.json.outbox.jsonl");
        match std::fs::read_to_string(path) {
            Ok(text) => text.lines().map(|l| serde_json::from_str(l).unwrap()).collect(),
            Err(_) => Vec::new(),
        }
    }
}
