//! Tabular experiment output: a CSV row stream plus a JSON summary.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Num(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            // shortest round-trip representation
            Cell::Num(x) => format!("{x:?}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Builds a row from heterogeneous values.
#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => {
        vec![$($crate::report::Cell::from($x)),*]
    };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<Cell>>,
    pub params: BTreeMap<String, Value>,
    pub summary: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        ExperimentReport {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            params: BTreeMap::new(),
            summary: BTreeMap::new(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width in report {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.params.insert(key.to_string(), value.into());
    }

    pub fn summarize(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column; text cells are skipped.
    pub fn column(&self, name: &str) -> Vec<f64> {
        match self.column_index(name) {
            None => Vec::new(),
            Some(i) => self.rows.iter().filter_map(|r| r[i].as_f64()).collect(),
        }
    }

    pub fn summary_f64(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(Value::as_f64)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush().map_err(LabError::from)
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| LabError::Io(e.to_string()))
    }

    /// The JSON document: `header` (caller supplied plus params), `columns`,
    /// `row_count`, `summary`, `checks` and `passed`.
    pub fn to_json(&self, mut header: serde_json::Map<String, Value>) -> Value {
        header.insert("experiment".into(), json!(self.name));
        header.insert("params".into(), json!(self.params));
        json!({
            "header": header,
            "columns": self.columns,
            "row_count": self.rows.len(),
            "summary": self.summary,
            "checks": self.checks,
            "passed": self.passed(),
        })
    }

    /// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`.
    pub fn write_files(
        &self,
        dir: &Path,
        stem: &str,
        header: serde_json::Map<String, Value>,
    ) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let csv_file = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        self.write_csv(std::io::BufWriter::new(csv_file))?;
        let text = serde_json::to_string_pretty(&self.to_json(header))?;
        std::fs::write(dir.join(format!("{stem}.json")), text + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut r = ExperimentReport::new("t", &["n", "x", "label"]);
        r.push(row![1usize, 0.1, "a,b"]);
        r.push(row![2usize, 1e-20, "plain"]);
        let text = r.csv_string().unwrap();
        assert_eq!(text, "n,x,label\n1,0.1,\"a,b\"\n2,1e-20,plain\n");
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let xs: Vec<f64> = rd
            .records()
            .map(|rec| rec.unwrap()[1].parse().unwrap())
            .collect();
        assert_eq!(xs, vec![0.1, 1e-20]);
        assert_eq!(r.column("x"), xs);
    }

    #[test]
    #[should_panic]
    fn row_width_enforced() {
        let mut r = ExperimentReport::new("t", &["a", "b"]);
        r.push(row![1usize]);
    }

    #[test]
    fn json_shape() {
        let mut r = ExperimentReport::new("t", &["a"]);
        r.param("D", 2.0);
        r.summarize("min", 0.5);
        r.check("ok", true, "");
        r.check("bad", false, "why");
        let j = r.to_json(serde_json::Map::new());
        assert_eq!(j["header"]["params"]["D"], json!(2.0));
        assert_eq!(j["summary"]["min"], json!(0.5));
        assert_eq!(j["passed"], json!(false));
        assert_eq!(r.failed_checks().len(), 1);
    }
}
