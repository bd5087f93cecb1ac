//! CSV ingestion and output: comma-separated decimal integers, UTF-8,
//! no header unless asked.

use crate::error::{Error, Result};
use crate::relation::{Row, SchemaRef, Table};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Load a table, aborting with a diagnostic naming the line on any
/// arity or parse problem.
pub fn load_csv(path: &Path, schema: SchemaRef, has_header: bool) -> Result<Table> {
    let display = path.display().to_string();
    let content = fs::read_to_string(path).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    let mut rows: Vec<Row> = Vec::new();
    for (index, line) in content.lines().enumerate() {
        let line_no = index + 1;
        if has_header && index == 0 {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != schema.width() {
            return Err(Error::Csv {
                path: display,
                line: line_no,
                reason: format!(
                    "expected {} fields, got {}",
                    schema.width(),
                    fields.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(fields.len());
        for (col, field) in fields.iter().enumerate() {
            let value = field.trim().parse::<i64>().map_err(|_| Error::Csv {
                path: display.clone(),
                line: line_no,
                reason: format!(
                    "column {} (`{}`): `{}` is not a decimal integer",
                    col + 1,
                    schema.columns()[col],
                    field.trim()
                ),
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    Table::new(schema, rows)
}

/// Write a table as CSV, optionally with a header row of column names.
pub fn write_csv(table: &Table, path: &Path, with_header: bool) -> Result<()> {
    let display = path.display().to_string();
    let io_err = |source| Error::Io {
        path: display.clone(),
        source,
    };
    let mut out = Vec::new();
    if with_header {
        writeln!(out, "{}", table.schema().columns().join(",")).map_err(io_err)?;
    }
    for row in table.rows() {
        let line: Vec<String> = row.iter().map(i64::to_string).collect();
        writeln!(out, "{}", line.join(",")).map_err(io_err)?;
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::Schema;

    fn tmp(content: &str) -> std::path::PathBuf {
        use std::sync::atomic::{AtomicU64, Ordering};
        static COUNTER: AtomicU64 = AtomicU64::new(0);
        let path = std::env::temp_dir().join(format!(
            "obqsim-csv-test-{}-{}.csv",
            std::process::id(),
            COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn empty_file_gives_empty_table() {
        let path = tmp("");
        let table = load_csv(&path, Schema::shared(vec!["a", "b"]).unwrap(), false).unwrap();
        assert_eq!(table.len(), 0);
        fs::remove_file(path).ok();
    }

    #[test]
    fn rows_load_in_file_order() {
        let path = tmp("1,2\n3,4\n5,6\n");
        let table = load_csv(&path, Schema::shared(vec!["a", "b"]).unwrap(), false).unwrap();
        assert_eq!(table.rows(), &[vec![1, 2], vec![3, 4], vec![5, 6]]);
        fs::remove_file(path).ok();
    }

    #[test]
    fn arity_error_names_the_line() {
        let path = tmp("1,2\n3,4,5\n");
        let err = load_csv(&path, Schema::shared(vec!["a", "b"]).unwrap(), false).unwrap_err();
        match err {
            Error::Csv { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
        fs::remove_file(path).ok();
    }

    #[test]
    fn non_integer_field_names_the_line() {
        let path = tmp("1,2\nx,4\n");
        let err = load_csv(&path, Schema::shared(vec!["a", "b"]).unwrap(), false).unwrap_err();
        match err {
            Error::Csv { line, reason, .. } => {
                assert_eq!(line, 2);
                assert!(reason.contains("not a decimal integer"));
            }
            other => panic!("unexpected error {other}"),
        }
        fs::remove_file(path).ok();
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv(
            Path::new("/nonexistent/nowhere.csv"),
            Schema::shared(vec!["a"]).unwrap(),
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn header_flag_skips_first_line() {
        let path = tmp("a,b\n1,2\n");
        let schema = Schema::shared(vec!["a", "b"]).unwrap();
        let table = load_csv(&path, schema, true).unwrap();
        assert_eq!(table.rows(), &[vec![1, 2]]);
        fs::remove_file(path).ok();
    }

    #[test]
    fn write_then_load_round_trips() {
        let schema = Schema::shared(vec!["a", "b"]).unwrap();
        let table = Table::new(schema.clone(), vec![vec![-1, 2], vec![3, 4]]).unwrap();
        let path = std::env::temp_dir().join(format!(
            "obqsim-csv-rt-{}.csv",
            std::process::id()
        ));
        write_csv(&table, &path, true).unwrap();
        let back = load_csv(&path, schema, true).unwrap();
        assert_eq!(back.rows(), table.rows());
        fs::remove_file(path).ok();
    }
}
