//! Tabular output as CSV or JSON.
//!
//! CSV floats carry 17 significant digits in scientific notation, so every
//! value re-parses to the same `f64`. Summaries are appended to CSV as
//! `# key,value` comment lines after the table.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::Format;
use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: BTreeMap<String, Value>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn summarize(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("summary values serialize");
        self.summary.insert(key.to_owned(), value);
    }

    fn check_finite(&self) -> Result<(), CliError> {
        let bad_cell = self.rows.iter().flatten().any(|c| matches!(c, Cell::Float(v) if !v.is_finite()));
        // serde_json maps non-finite floats to null, which would not round-trip
        if bad_cell || self.summary.values().any(has_null) {
            return Err(CliError::Numeric("non-finite value in output".into()));
        }
        Ok(())
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        self.check_finite()?;
        Ok(match format {
            Format::Csv => self.to_csv(),
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Numeric(e.to_string()))?;
                s.push('\n');
                s
            }
        })
    }

    fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.iter().map(|c| quote(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(csv_cell).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        for (key, value) in &self.summary {
            out.push_str(&format!("# {key},{}\n", summary_text(value)));
        }
        out
    }
}

fn has_null(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Array(a) => a.iter().any(has_null),
        Value::Object(o) => o.values().any(has_null),
        _ => false,
    }
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_cell(c: &Cell) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Float(v) => format_float(*v),
        Cell::Text(s) => quote(s),
        Cell::Bool(b) => b.to_string(),
        Cell::Empty => String::new(),
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn summary_text(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(f) if !n.is_i64() && !n.is_u64() => format_float(f),
            _ => n.to_string(),
        },
        Value::String(s) => quote(s),
        other => quote(&other.to_string()),
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["n", "branch", "value", "note"]);
        t.push(vec![1usize.into(), "plus".into(), 0.1f64.into(), Cell::Empty]);
        t.push(vec![2usize.into(), "a,b".into(), (-1.0f64 / 3.0).into(), true.into()]);
        t.summarize("ratio", 2f64.sqrt());
        t.summarize("count", 3);
        t
    }

    #[test]
    fn csv_layout() {
        let csv = sample().render(Format::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,branch,value,note");
        assert_eq!(lines[1], "1,plus,1.0000000000000001e-1,");
        assert_eq!(lines[2], "2,\"a,b\",-3.3333333333333331e-1,true");
        assert_eq!(lines[3], "# count,3");
        assert_eq!(lines[4], "# ratio,1.4142135623730951e0");
        let v: f64 = "-3.3333333333333331e-1".parse().unwrap();
        assert_eq!(v, -1.0 / 3.0);
    }

    #[test]
    fn json_round_trip() {
        let t = sample();
        let json = t.render(Format::Json).unwrap();
        let back: Table = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn non_finite_rejected() {
        let mut t = Table::new(&["x"]);
        t.push(vec![f64::NAN.into()]);
        assert!(matches!(t.render(Format::Csv), Err(CliError::Numeric(_))));
        let mut t = Table::new(&["x"]);
        t.summarize("bad", f64::INFINITY);
        assert!(matches!(t.render(Format::Json), Err(CliError::Numeric(_))));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, "a\n").unwrap();
        write_atomic(&path, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
