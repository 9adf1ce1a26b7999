//! Tables with a config header, rendered as CSV or JSON.
//!
//! CSV: `#`-prefixed header lines, then per table a `# table: name` line,
//! the column row and the data rows. JSON: one object with the same header
//! fields and `tables: [{name, columns, rows}]`. Cells are strings, integers
//! or null in both encodings.

use serde::Serialize;
use serde_json::{json, Value};

use enumsm::{ExtInt, Prefix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Cell {
    Int(i64),
    Text(String),
    Null,
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

impl From<&Prefix> for Cell {
    fn from(v: &Prefix) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Finite values as integers, infinities as `inf` / `-inf`.
impl From<ExtInt> for Cell {
    fn from(v: ExtInt) -> Self {
        match v {
            ExtInt::Finite(x) => Cell::Int(x),
            other => Cell::Text(other.to_string()),
        }
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

impl Cell {
    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Null => Value::Null,
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Everything that identifies a run's inputs.
#[derive(Clone, Debug, Serialize)]
pub struct Header<'a, C: Serialize> {
    pub tool: &'static str,
    pub instruction_set: &'static str,
    pub snapshot_sha256: String,
    pub stage: usize,
    pub config: &'a C,
}

pub fn render<C: Serialize>(header: &Header<C>, tables: &[Table], format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let tables: Vec<Value> = tables
                .iter()
                .map(|t| {
                    json!({
                        "name": t.name,
                        "columns": t.columns,
                        "rows": t.rows.iter().map(|r| r.iter().map(Cell::to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let doc = json!({ "header": header, "tables": tables });
            let mut out = serde_json::to_vec_pretty(&doc).expect("json encoding");
            out.push(b'\n');
            out
        }
        Format::Csv => {
            let mut out = Vec::new();
            out.extend(format!("# tool: {}\n", header.tool).bytes());
            out.extend(format!("# instruction_set: {}\n", header.instruction_set).bytes());
            out.extend(format!("# snapshot_sha256: {}\n", header.snapshot_sha256).bytes());
            out.extend(format!("# stage: {}\n", header.stage).bytes());
            let cfg = serde_json::to_string(header.config).expect("json encoding");
            out.extend(format!("# config: {cfg}\n").bytes());
            for t in tables {
                out.extend(format!("# table: {}\n", t.name).bytes());
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&t.columns).expect("csv encoding");
                for r in &t.rows {
                    w.write_record(r.iter().map(Cell::to_csv)).expect("csv encoding");
                }
                out.extend(w.into_inner().expect("csv flush"));
            }
            out
        }
    }
}
