mod common;

use std::collections::BTreeSet;

use common::Fixture;
use proptest::prelude::*;
use uuis_core::inventory::NewAsset;
use uuis_core::org::{is_descendant, verify_tree, UnitChanges};
use uuis_core::{Error, Id, PasswordDigest, PermissionAction, ScopedPermission, Store, Timestamp, UnitKind};

/// Every (unit, ancestor) pair reachable by enumerating root-to-leaf paths.
fn path_pairs(parents: &[(Id, Option<Id>)]) -> BTreeSet<(Id, Id)> {
    let parent_of = |id: &Id| parents.iter().find(|(u, _)| u == id).and_then(|(_, p)| p.clone());
    let mut pairs = BTreeSet::new();
    for (unit, _) in parents {
        let mut path = vec![unit.clone()];
        while let Some(p) = parent_of(path.last().unwrap()) {
            path.push(p);
        }
        for ancestor in path {
            pairs.insert((unit.clone(), ancestor));
        }
    }
    pairs
}

proptest! {
    #[test]
    fn is_descendant_matches_path_enumeration(shape in prop::collection::vec(0usize..4, 1..6)) {
        let mut store = Store::new();
        let (root, it) = store
            .transact(Timestamp(1), |t| t.bootstrap("U", "it", PasswordDigest::new("x")))
            .unwrap();
        let mut clock = 1;
        let mut next = |store: &mut Store, name: String, kind, parent: &Id| {
            clock += 1;
            store.transact(Timestamp(clock), |t| t.create_org_unit(&it.id, &name, kind, Some(parent))).unwrap().id
        };
        for (f, departments) in shape.iter().enumerate() {
            let faculty = next(&mut store, format!("F{f}"), UnitKind::Faculty, &root.id);
            for d in 0..*departments {
                next(&mut store, format!("F{f}D{d}"), UnitKind::Department, &faculty);
            }
        }
        let state = store.state();
        verify_tree(state).unwrap();
        let parents: Vec<(Id, Option<Id>)> =
            state.org_units().values().map(|u| (u.id.clone(), u.parent_id.clone())).collect();
        let expected = path_pairs(&parents);
        for (a, _) in &parents {
            for (b, _) in &parents {
                let got = is_descendant(state, a, b).unwrap();
                prop_assert_eq!(got, expected.contains(&(a.clone(), b.clone())), "{} under {}", a, b);
            }
        }
    }
}

#[test]
fn descendant_examples() {
    let fx = Fixture::new();
    let s = fx.store.state();
    assert!(is_descendant(s, &fx.d1, &fx.d1).unwrap());
    assert!(is_descendant(s, &fx.d1, &fx.f1).unwrap());
    assert!(!is_descendant(s, &fx.d1, &fx.f2).unwrap());
    assert!(matches!(is_descendant(s, &fx.d1, &Id::new("nope")), Err(Error::NotFound { .. })));
}

#[test]
fn create_org_unit_rules() {
    let mut fx = Fixture::new();
    let f1 = fx.f1.clone();
    let it = fx.user("it");
    let chem = fx.tx(|t| t.create_org_unit(&it, "Chemistry 2", UnitKind::Department, Some(&f1))).unwrap();
    assert_eq!(chem.parent_id.as_ref(), Some(&f1));

    let u1 = fx.user("u1");
    let err = fx.tx(|t| t.create_org_unit(&u1, "X", UnitKind::Department, Some(&f1))).unwrap_err();
    assert_eq!(err, Error::PermissionDenied);

    let root = fx.root.clone();
    let err = fx.tx(|t| t.create_org_unit(&it, "Y", UnitKind::Department, Some(&root))).unwrap_err();
    assert!(matches!(err, Error::InvalidHierarchy(_)));

    let err = fx.tx(|t| t.create_org_unit(&it, "Z", UnitKind::University, None)).unwrap_err();
    assert!(matches!(err, Error::InvalidHierarchy(_)));

    let err = fx.tx(|t| t.create_org_unit(&it, "Ext", UnitKind::External, Some(&root))).unwrap_err();
    assert!(matches!(err, Error::InvalidHierarchy(_)));
}

#[test]
fn edit_and_delete_org_units() {
    let mut fx = Fixture::new();
    let d1 = fx.d1.clone();
    let fa1 = fx.user("fa1");
    // level 2 holds no universityPart actions by default
    let changes = UnitChanges { name: Some("D1-renamed".into()) };
    assert_eq!(fx.tx(|t| t.edit_org_unit(&fa1, &d1, changes.clone())).unwrap_err(), Error::PermissionDenied);
    let uni = fx.user("uni");
    let f1 = fx.f1.clone();
    let perms = BTreeSet::from([ScopedPermission::new(PermissionAction::UniversityPartEdit, f1)]);
    fx.tx(|t| t.delegate(&uni, &fa1, perms)).unwrap();
    assert_eq!(fx.tx(|t| t.edit_org_unit(&fa1, &d1, changes)).unwrap().name, "D1-renamed");
    let d3 = fx.d3.clone();
    let other = UnitChanges { name: Some("nope".into()) };
    assert_eq!(fx.tx(|t| t.edit_org_unit(&fa1, &d3, other)).unwrap_err(), Error::PermissionDenied);

    fx.laptop_type();
    let spec = NewAsset {
        serial_number: "SN-1".into(),
        type_name: "laptop".into(),
        owner_unit_id: fx.d2.clone(),
        location_id: None,
        properties: Default::default(),
    };
    fx.as_it(|t, it| t.add_asset(it, spec)).unwrap();
    let d2 = fx.d2.clone();
    assert_eq!(fx.as_it(|t, it| t.delete_org_unit(it, &d2)).unwrap_err(), Error::UnitNotEmpty);

    let f2 = fx.f2.clone();
    let fresh = fx.as_it(|t, it| t.create_org_unit(it, "Fresh", UnitKind::Department, Some(&f2))).unwrap();
    fx.as_it(|t, it| t.delete_org_unit(it, &fresh.id)).unwrap();
    assert!(fx.store.state().org_units().get(&fresh.id).is_none());

    let root = fx.root.clone();
    assert!(fx.as_it(|t, it| t.delete_org_unit(it, &root)).is_err());
}
