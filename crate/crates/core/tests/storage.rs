mod common;

use std::collections::BTreeSet;

use common::Fixture;
use proptest::prelude::*;
use uuis_core::workflow::NewRequest;
use uuis_core::{
    Error, Id, PermissionAction, RequestForm, RequestKind, RequestLine, ScopedPermission, Snapshot, Store,
    Timestamp, UnitKind, SNAPSHOT_FORMAT_VERSION,
};

#[test]
fn failed_work_persists_nothing() {
    let mut fx = Fixture::new();
    let before = fx.store.export();
    let audit = fx.store.state().audit_log().len();
    let f1 = fx.f1.clone();
    let err = fx
        .as_it(|t, it| {
            t.create_org_unit(it, "Temp", UnitKind::Department, Some(&f1))?;
            t.create_org_unit(it, "Temp 2", UnitKind::Department, Some(&f1))?;
            Err::<(), _>(Error::InvalidInput("late failure".into()))
        })
        .unwrap_err();
    assert_eq!(err, Error::InvalidInput("late failure".into()));
    assert_eq!(fx.store.state().audit_log().len(), audit);
    assert_eq!(fx.store.export(), before);
}

#[test]
fn sequential_transactions_give_gapless_seqs() {
    let mut fx = Fixture::new();
    fx.laptop_type();
    let d1 = fx.d1.clone();
    for i in 0..1000 {
        fx.add_laptop(&format!("SN-{i}"), &d1);
    }
    let log = fx.store.state().audit_log();
    assert!(log.len() > 1000);
    for (i, r) in log.iter().enumerate() {
        assert_eq!(r.seq, i as u64 + 1);
    }
    assert!(log.windows(2).all(|w| w[0].at <= w[1].at));
}

fn populated() -> Fixture {
    let mut fx = Fixture::new();
    let ext = fx.add_external("Ministry");
    let (d1, d2) = (fx.d1.clone(), fx.d2.clone());
    fx.add_laptop("SN-1", &d1);
    fx.add_laptop("SN-2", &d1);
    let room = fx.add_room("H", "801", &d1);
    let (da1, fa1, uni, u1) = (fx.user("da1"), fx.user("fa1"), fx.user("uni"), fx.user("u1"));
    let perms = BTreeSet::from([ScopedPermission::new(PermissionAction::SearchSimple, d1.clone())]);
    let g = fx.tx(|t| t.delegate(&da1, &u1, perms)).unwrap();
    let req = |serial: &str, kind, dest: Option<&Id>| NewRequest {
        form: RequestForm::Advanced,
        kind,
        text: "please".into(),
        lines: vec![RequestLine::asset(serial)],
        destination_unit_id: dest.cloned(),
    };
    let r = fx.tx(|t| t.create_request(&u1, req("SN-1", RequestKind::Transfer, Some(&d2)))).unwrap();
    fx.tx(|t| t.approve(&da1, &r.id, "")).unwrap();
    fx.tx(|t| t.approve(&fa1, &r.id, "")).unwrap();
    fx.tx(|t| t.mark_executed(&da1, &r.id)).unwrap();
    let r = fx.tx(|t| t.create_request(&u1, req("SN-2", RequestKind::Transfer, Some(&ext)))).unwrap();
    fx.tx(|t| t.approve(&uni, &r.id, "")).unwrap();
    let r = fx.tx(|t| t.create_request(&u1, req("SN-2", RequestKind::Borrow, None)));
    assert!(r.is_err());
    fx.tx(|t| t.revoke(&da1, &g.id)).unwrap();
    let id = fx.add_laptop("SN-3", &d1);
    fx.tx(|t| t.transfer_direct(&da1, &id, &room, None)).unwrap();
    fx.tx(|t| t.group_assets(&da1, "kit", std::slice::from_ref(&id))).unwrap();
    fx
}

#[test]
fn export_import_export_is_identity() {
    let fx = populated();
    let first = fx.store.export();
    let restored = Store::from_snapshot(&first).unwrap();
    assert_eq!(restored.export(), first);
    assert!(first.ends_with('\n'));
    let snap = Snapshot::parse(&first).unwrap();
    assert_eq!(snap.format_version, SNAPSHOT_FORMAT_VERSION);
    assert_eq!(snap.taken_at, fx.store.state().last_modified());
    let names: Vec<&str> = snap.sections.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        ["org_units", "users", "permission_groups", "grants", "asset_types", "locations", "assets", "groups", "requests", "audit", "notifications"]
    );
}

#[test]
fn restored_store_keeps_issuing_fresh_ids() {
    let fx = populated();
    let mut store = Store::from_snapshot(&fx.store.export()).unwrap();
    let known: BTreeSet<String> = store.state().assets().keys().map(|k| k.to_string()).collect();
    let it = fx.user("it");
    let d1 = fx.d1.clone();
    let asset = store
        .transact(Timestamp(10_000), |t| {
            t.add_asset(
                &it,
                uuis_core::inventory::NewAsset {
                    serial_number: "NEW".into(),
                    type_name: "laptop".into(),
                    owner_unit_id: d1,
                    location_id: None,
                    properties: Default::default(),
                },
            )
        })
        .unwrap();
    assert!(!known.contains(asset.id.as_str()));
    assert!(store.state().assets().keys().all(|k| *k <= asset.id));
}

#[test]
fn restore_guards() {
    let fx = populated();
    let doc = fx.store.export();
    let mut target = Fixture::new().store;
    assert_eq!(target.restore(&doc, false).unwrap_err(), Error::NonEmptyStore);
    target.restore(&doc, true).unwrap();
    assert_eq!(target.export(), doc);

    let v99 = doc.replacen("\"format_version\": 1", "\"format_version\": 99", 1);
    assert_ne!(v99, doc);
    assert!(matches!(Store::from_snapshot(&v99), Err(Error::VersionMismatch { found: 99, .. })));
    assert!(matches!(Store::from_snapshot("{"), Err(Error::MalformedSnapshot(_))));
    assert!(matches!(Store::from_snapshot("{\"format_version\": 1}"), Err(Error::MalformedSnapshot(_))));
}

#[test]
fn tampered_snapshots_are_rejected() {
    let fx = populated();
    let doc = fx.store.export();
    let mut value: serde_json::Value = serde_json::from_str(&doc).unwrap();
    let sections = value["sections"].as_array_mut().unwrap();
    let audit = sections.iter_mut().find(|s| s["name"] == "audit").unwrap();
    audit["rows"].as_array_mut().unwrap().remove(3);
    let broken = serde_json::to_string(&value).unwrap();
    assert!(Store::from_snapshot(&broken).is_err());

    let mut value: serde_json::Value = serde_json::from_str(&doc).unwrap();
    let sections = value["sections"].as_array_mut().unwrap();
    let assets = sections.iter_mut().find(|s| s["name"] == "assets").unwrap();
    let rows = assets["rows"].as_array_mut().unwrap();
    let dup = rows[0]["serial_number"].clone();
    rows[1]["serial_number"] = dup;
    let broken = serde_json::to_string(&value).unwrap();
    assert!(matches!(Store::from_snapshot(&broken), Err(Error::ConstraintViolation(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn round_trip_for_reachable_states(ops in prop::collection::vec((0u8..5, 0usize..6, 0usize..10), 0..20)) {
        let mut fx = Fixture::new();
        let units = fx.units();
        let users: Vec<Id> = fx.users.values().cloned().collect();
        fx.laptop_type();
        for (kind, a, b) in ops {
            let _ = match kind {
                0 => fx.as_it(|t, it| t.add_asset(it, uuis_core::inventory::NewAsset {
                    serial_number: format!("S{a}{b}"),
                    type_name: "laptop".into(),
                    owner_unit_id: units[a % units.len()].clone(),
                    location_id: None,
                    properties: [("k".to_string(), format!("v\"{b}\\ü"))].into(),
                })).map(|_| ()),
                1 => fx.tx(|t| t.create_request(&users[b], NewRequest {
                    form: RequestForm::Basic,
                    kind: RequestKind::Borrow,
                    text: format!("need {a}"),
                    lines: vec![],
                    destination_unit_id: None,
                })).map(|_| ()),
                2 => {
                    let reqs: Vec<Id> = fx.store.state().requests().keys().cloned().collect();
                    match reqs.get(a) { Some(r) => fx.tx(|t| t.approve(&users[b], r, "n")).map(|_| ()), None => Ok(()) }
                }
                3 => fx.tx(|t| t.delegate(&users[b], &users[a], BTreeSet::from([
                    ScopedPermission::new(PermissionAction::AssetList, units[a % units.len()].clone()),
                ]))).map(|_| ()),
                _ => {
                    let reqs: Vec<Id> = fx.store.state().requests().keys().cloned().collect();
                    match reqs.get(a) { Some(r) => fx.tx(|t| t.cancel(&users[b], r)).map(|_| ()), None => Ok(()) }
                }
            };
        }
        let first = fx.store.export();
        let again = Store::from_snapshot(&first).unwrap().export();
        prop_assert_eq!(again, first);
    }
}
