use proptest::prelude::*;
use uuis::clock::ManualClock;
use uuis::persist::FileStore;
use uuis_core::{PasswordDigest, UnitKind};

#[derive(Clone, Debug)]
enum Op {
    Faculty(String),
    Department(usize, String),
    Rename(usize, String),
    Delete(usize),
    Tick(u64),
}

fn op() -> impl Strategy<Value = Op> {
    let name = "[A-Za-z ]{0,12}";
    prop_oneof![
        name.prop_map(Op::Faculty),
        (0..8usize, name).prop_map(|(i, n)| Op::Department(i, n)),
        (0..8usize, name).prop_map(|(i, n)| Op::Rename(i, n)),
        (0..8usize).prop_map(Op::Delete),
        (0..5u64).prop_map(Op::Tick),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Whatever mix of commits and refusals, the file always reopens to the
    /// state held in memory.
    #[test]
    fn reopened_store_equals_memory(ops in prop::collection::vec(op(), 1..25)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        let clock = ManualClock::at(100);
        let mut store = FileStore::open(&path).unwrap();
        let (_, it) = store
            .transact(&clock, |t| t.bootstrap("U", "it", PasswordDigest::new("x")))
            .unwrap();
        let mut units = vec![store.state().root().unwrap().id.clone()];
        for op in ops {
            let pick = |i: usize| units[i % units.len()].clone();
            let result = match op {
                Op::Faculty(name) => {
                    let root = units[0].clone();
                    store.transact(&clock, |t| t.create_org_unit(&it.id, &name, UnitKind::Faculty, Some(&root))).map(|u| units.push(u.id))
                }
                Op::Department(i, name) => {
                    let parent = pick(i);
                    store.transact(&clock, |t| t.create_org_unit(&it.id, &name, UnitKind::Department, Some(&parent))).map(|u| units.push(u.id))
                }
                Op::Rename(i, name) => {
                    let unit = pick(i);
                    let changes = uuis_core::org::UnitChanges { name: Some(name) };
                    store.transact(&clock, |t| t.edit_org_unit(&it.id, &unit, changes)).map(|_| ())
                }
                Op::Delete(i) => {
                    let unit = pick(i);
                    store.transact(&clock, |t| t.delete_org_unit(&it.id, &unit)).map(|_| units.retain(|u| *u != unit))
                }
                Op::Tick(s) => {
                    clock.advance(s);
                    Ok(())
                }
            };
            let _ = result;
            prop_assert_eq!(std::fs::read_to_string(&path).unwrap(), store.export());
        }
        let in_memory = store.export();
        drop(store);
        let reopened = FileStore::open(&path).unwrap();
        prop_assert_eq!(reopened.export(), in_memory);
    }
}
