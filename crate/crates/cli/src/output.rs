//! Tables and summaries, written as CSV + JSON or as a single JSON document.

use std::path::Path;

use anyhow::Context;
use serde_json::{json, Map, Value};

/// Bumped whenever a field of any emitted document changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::F(x) if x.is_nan() => "nan".into(),
            Cell::F(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::F(x) => format!("{x:.16e}"),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(x) => json!(x),
            Cell::I(i) => json!(i),
            Cell::S(s) => json!(s),
            Cell::B(b) => json!(b),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        Cell::F(x.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let m: Map<String, Value> = self.header.iter().zip(r).map(|(h, c)| (h.to_string(), c.json())).collect();
                Value::Object(m)
            })
            .collect();
        Value::Array(rows)
    }
}

pub struct Output {
    pub command: &'static str,
    pub summary: Value,
    pub tables: Vec<Table>,
}

impl Output {
    pub fn write(&self, dir: &Path, format: Format, config: &Value) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": config,
            "summary": self.summary,
        });
        match format {
            Format::Json => {
                let tables: Map<String, Value> = self.tables.iter().map(|t| (t.name.clone(), t.json())).collect();
                doc["tables"] = Value::Object(tables);
            }
            Format::Csv => {
                for t in &self.tables {
                    let path = dir.join(format!("{}_{}.csv", self.command, t.name));
                    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
                    w.write_record(&t.header)?;
                    for r in &t.rows {
                        w.write_record(r.iter().map(Cell::text))?;
                    }
                    w.flush()?;
                }
                doc["tables"] = Value::Array(
                    self.tables
                        .iter()
                        .map(|t| json!(format!("{}_{}.csv", self.command, t.name)))
                        .collect(),
                );
            }
        }
        let path = dir.join(format!("{}.json", self.command));
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
