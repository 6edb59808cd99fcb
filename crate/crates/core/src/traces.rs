//! CSV output of report traces.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::report::{RunReport, Trace};

/// Writes one trace as CSV: a header row, then one row per sample with
/// every value in 17 significant digits.
pub fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(&trace.columns).map_err(csv_error)?;
    for row in &trace.rows {
        w.write_record(row.iter().map(|v| format!("{v:.16e}"))).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every trace of the report into `dir` as `<scenario>.<trace>.csv`.
pub fn emit_traces(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for s in &report.scenarios {
        for t in &s.traces {
            let path = dir.join(format!("{}.{}.csv", sanitize(&s.scenario), sanitize(&t.name)));
            write_trace(t, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::domain(format!("csv: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_for_empty_trace() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trace(&Trace::new("t", &["x", "re_f1"]), &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "x,re_f1\n");
    }

    #[test]
    fn values_carry_seventeen_digits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Trace::new("t", &["x"]);
        t.rows.push(vec![0.1]);
        write_trace(&t, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let value: f64 = text.lines().nth(1).unwrap().parse().unwrap();
        assert_eq!(value, 0.1);
        assert_eq!(text.lines().nth(1).unwrap(), "1.0000000000000001e-1");
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let t = Trace::new("t", &["x"]);
        let err = write_trace(&t, Path::new("/nonexistent-dir/t.csv")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn names_are_sanitized() {
        assert_eq!(sanitize("flow-a b/c"), "flow-a_b_c");
    }
}
