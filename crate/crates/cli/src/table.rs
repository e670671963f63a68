use std::io::Write;

use serde_json::{Map, Number, Value};

use crate::OutputFormat;

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Missing,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }

    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn csv_field(&self) -> String {
        match self {
            Cell::Num(x) if x.is_finite() => fmt_float(*x),
            Cell::Num(_) | Cell::Missing => String::new(),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Missing => Value::Null,
        }
    }
}

/// 17 significant digits, round-trip exact.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON number with 17 significant digits; non-finite values become null.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let n: Number = fmt_float(x).parse().expect("formatted float is valid JSON");
    Value::Number(n)
}

pub struct Table {
    pub command: &'static str,
    pub config: Map<String, Value>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(command: &'static str, columns: Vec<&'static str>) -> Self {
        Self {
            command,
            config: Map::new(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.config.insert(key.to_string(), value);
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, format: OutputFormat, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(out),
            OutputFormat::Json => self.write_json(out),
        }
    }

    fn config_echo(&self) -> Value {
        let mut cfg = Map::new();
        cfg.insert("command".into(), Value::String(self.command.into()));
        cfg.extend(self.config.clone());
        Value::Object(cfg)
    }

    fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "# pathtele {}", pathtele_core::verify::SUITE_VERSION)?;
        writeln!(out, "# config: {}", self.config_echo())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv_field))?;
        }
        w.flush()
    }

    fn write_json(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                Value::Object(
                    self.columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.to_string(), v.json()))
                        .collect(),
                )
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("config".into(), self.config_echo());
        doc.insert("rows".into(), Value::Array(rows));
        doc.insert(
            "suite_version".into(),
            Value::String(pathtele_core::verify::SUITE_VERSION.into()),
        );
        serde_json::to_writer_pretty(&mut *out, &Value::Object(doc))?;
        writeln!(out)
    }
}
