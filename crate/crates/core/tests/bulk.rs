mod common;

use common::Fixture;
use uuis_core::bulk::BulkFile;
use uuis_core::{Error, Id};

fn header(props: &[&str]) -> Vec<String> {
    let mut h: Vec<String> =
        ["serial_number", "type", "owner_unit", "building", "floor", "room"].iter().map(|s| s.to_string()).collect();
    h.extend(props.iter().map(|p| format!("prop:{p}")));
    h
}

fn row(serial: &str, owner: &Id, ram: &str) -> Vec<String> {
    vec![serial.into(), "laptop".into(), owner.to_string(), String::new(), String::new(), String::new(), ram.into()]
}

fn file(rows: Vec<Vec<String>>) -> BulkFile {
    BulkFile { header: header(&["ram"]), rows: rows.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect() }
}

#[test]
fn three_rows_give_three_records_and_a_summary() {
    let mut fx = Fixture::new();
    fx.laptop_type();
    let d1 = fx.d1.clone();
    let f = file(vec![row("A", &d1, "8"), row("B", &d1, "16"), row("C", &d1, "")]);
    let before = fx.store.state().audit_log().len();
    let summary = fx.as_it(|t, it| t.bulk_import(it, &f)).unwrap();
    assert_eq!((summary.created, summary.updated), (3, 0));
    let log = &fx.store.state().audit_log()[before..];
    assert_eq!(log.iter().filter(|r| !r.is_summary()).count(), 3);
    assert_eq!(log.iter().filter(|r| r.is_summary()).count(), 1);
    assert!(!fx.store.state().asset_by_serial("C").unwrap().properties.contains_key("ram"));

    // a second pass updates in place
    let f = file(vec![row("A", &d1, "64")]);
    let summary = fx.as_it(|t, it| t.bulk_import(it, &f)).unwrap();
    assert_eq!((summary.created, summary.updated), (0, 1));
    assert_eq!(fx.store.state().asset_by_serial("A").unwrap().properties["ram"], "64");
}

#[test]
fn one_bad_row_rejects_the_file() {
    let mut fx = Fixture::new();
    fx.laptop_type();
    let d1 = fx.d1.clone();
    let mut rows: Vec<Vec<String>> = (0..100).map(|i| row(&format!("SN-{i:03}"), &d1, "8")).collect();
    rows[41][1] = "toaster".into();
    let snapshot = fx.store.export();
    let err = fx.as_it(|t, it| t.bulk_import(it, &file(rows.clone()))).unwrap_err();
    let Error::ValidationFailed(errors) = err else { panic!("expected validation failure") };
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0].row, 42);
    assert_eq!(errors[0].column.as_deref(), Some("type"));
    assert_eq!(fx.store.export(), snapshot);

    rows[41][1] = "laptop".into();
    let summary = fx.as_it(|t, it| t.bulk_import(it, &file(rows))).unwrap();
    assert_eq!(summary.created, 100);
    assert_eq!(fx.store.state().assets().len(), 100);
}

#[test]
fn all_row_errors_are_reported() {
    let mut fx = Fixture::new();
    fx.laptop_type();
    let (d1, d2) = (fx.d1.clone(), fx.d2.clone());
    fx.add_laptop("OLD", &d1);
    let rows = vec![
        row("", &d1, ""),
        row("X", &Id::new("unit-nope"), ""),
        vec!["Y".into(), "laptop".into(), d1.to_string(), "H".into(), String::new(), String::new(), String::new()],
        row("Z", &d1, ""),
        row("Z", &d1, ""),
        row("OLD", &d2, ""),
        vec!["short".into()],
    ];
    let err = fx.as_it(|t, it| t.bulk_import(it, &file(rows))).unwrap_err();
    let Error::ValidationFailed(errors) = err else { panic!() };
    let rows: Vec<usize> = errors.iter().map(|e| e.row).collect();
    assert_eq!(rows, vec![1, 2, 3, 5, 6, 7]);

    // owner by unique name; permission is per row
    let da1 = fx.user("da1");
    let by_name = vec![vec![
        "N1".into(), "laptop".into(), "Computer Eng".into(), String::new(), String::new(), String::new(), String::new(),
    ]];
    fx.tx(|t| t.bulk_import(&da1, &file(by_name))).unwrap();
    let err = fx.tx(|t| t.bulk_import(&da1, &file(vec![row("N2", &d2, "")]))).unwrap_err();
    assert!(matches!(err, Error::ValidationFailed(_)));
}

#[test]
fn header_and_size_limits() {
    let mut fx = Fixture::new();
    fx.laptop_type();
    let bad = BulkFile { header: vec!["serial".into()], rows: vec![(1, vec!["A".into()])] };
    assert!(matches!(fx.as_it(|t, it| t.bulk_import(it, &bad)), Err(Error::ValidationFailed(_))));
    let mut h = header(&[]);
    h.push("colour".into());
    let bad = BulkFile { header: h, rows: vec![] };
    assert!(matches!(fx.as_it(|t, it| t.bulk_import(it, &bad)), Err(Error::ValidationFailed(_))));
    let empty = BulkFile { header: header(&["ram"]), rows: vec![] };
    assert!(matches!(fx.as_it(|t, it| t.bulk_import(it, &empty)), Err(Error::ValidationFailed(_))));
    let d1 = fx.d1.clone();
    let huge = file((0..10_001).map(|i| row(&format!("S{i}"), &d1, "")).collect());
    assert!(matches!(fx.as_it(|t, it| t.bulk_import(it, &huge)), Err(Error::ValidationFailed(_))));
}
