use uuis_core::bulk::BulkFile;
use uuis_core::search::ReportTable;
use uuis_core::{Error, RowError};

/// Decodes a bulk entry file. Blank lines are skipped and do not count as
/// rows; short or long rows are passed through for the validator to name.
pub fn parse_bulk(bytes: &[u8]) -> Result<BulkFile, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(h)) => h.iter().map(str::to_string).collect(),
        Some(Err(e)) => return Err(malformed(0, e)),
        None => Vec::new(),
    };
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| malformed(rows.len() + 1, e))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push((rows.len() + 1, record.iter().map(str::to_string).collect()));
    }
    Ok(BulkFile { header, rows })
}

fn malformed(row: usize, e: csv::Error) -> Error {
    Error::ValidationFailed(vec![RowError { row, column: None, reason: format!("unreadable CSV: {e}") }])
}

pub fn report_csv(table: &ReportTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns).expect("writing to memory");
    for row in &table.rows {
        w.write_record(row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("cells are UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use uuis_core::search::ReportKind;

    #[test]
    fn blank_lines_are_not_rows() {
        let f = parse_bulk(b"serial_number,type\n\nA,laptop\n\n\nB,laptop\n").unwrap();
        assert_eq!(f.header, ["serial_number", "type"]);
        assert_eq!(f.rows, vec![(1, vec!["A".into(), "laptop".into()]), (2, vec!["B".into(), "laptop".into()])]);
    }

    #[test]
    fn quoting_survives() {
        let f = parse_bulk(b"a,b\n\"x, y\",\"say \"\"hi\"\"\"\nshort\n").unwrap();
        assert_eq!(f.rows[0].1, ["x, y", "say \"hi\""]);
        assert_eq!(f.rows[1].1, ["short"]);
        assert!(parse_bulk(b"").unwrap().header.is_empty());
    }

    #[test]
    fn report_escapes_cells() {
        let t = ReportTable {
            kind: ReportKind::Requests,
            columns: vec!["a".into(), "b".into()],
            rows: vec![vec!["1,2".into(), "plain".into()]],
        };
        assert_eq!(report_csv(&t), "a,b\n\"1,2\",plain\n");
    }
}
