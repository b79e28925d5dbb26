//! Deterministic JSON and CSV rendering.

use serde_json::{Map, Value};
use std::io::{self, Write};
use torusdimer::linalg::LogValue;

/// `x` rounded to 15 significant digits; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let r: f64 = format!("{x:.14e}").parse().expect("round trip of a formatted float");
    // avoid printing -0
    let r = if r == 0.0 { 0.0 } else { r };
    serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn matrix2(m: [[f64; 2]; 2]) -> Value {
    Value::Array(m.iter().map(|r| nums(r)).collect())
}

/// Plain value of a log quantity; `null` when it overflows.
pub fn log_value(v: LogValue) -> Value {
    num(v.value())
}

/// Logarithm of a log quantity; `null` encodes `log 0`.
pub fn log_of(v: LogValue) -> Value {
    v.log().map_or(Value::Null, num)
}

pub fn complex(re: f64, im: f64) -> Value {
    Value::Array(vec![num(re), num(im)])
}

/// Insertion-ordered object builder.
#[derive(Default)]
pub struct Obj(Map<String, Value>);

impl Obj {
    pub fn new() -> Self {
        Obj(Map::new())
    }
    pub fn put(mut self, k: &str, v: impl Into<Value>) -> Self {
        self.0.insert(k.to_string(), v.into());
        self
    }
    pub fn set(&mut self, k: &str, v: impl Into<Value>) {
        self.0.insert(k.to_string(), v.into());
    }
}

impl From<Obj> for Value {
    fn from(o: Obj) -> Value {
        Value::Object(o.0)
    }
}

/// A flat table that renders as CSV.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Table {
    pub fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// What a subcommand produced: a JSON document and, when it has a natural
/// tabular form, the table used for `--out csv`.
pub struct Report {
    pub json: Value,
    pub table: Option<Table>,
    /// A check ran and did not pass; the report is still printed.
    pub failed: bool,
}

pub fn write_json(v: &Value, w: &mut dyn Write) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, v)?;
    writeln!(w)
}

/// Key/value CSV for reports without a table: one row per scalar leaf, keys joined by `.`.
pub fn flatten(v: &Value) -> Table {
    fn walk(prefix: &str, v: &Value, rows: &mut Vec<Vec<Value>>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&p, x, rows);
                }
            }
            Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), x, rows);
                }
            }
            leaf => rows.push(vec![Value::String(prefix.to_string()), leaf.clone()]),
        }
    }
    let mut rows = Vec::new();
    walk("", v, &mut rows);
    Table { header: vec!["key", "value"], rows }
}
