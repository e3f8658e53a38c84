use serde_json::{Map, Number, Value};

use crate::config::Format;
use crate::CliError;

/// Significant digits in every printed number.
pub const SIG_DIGITS: usize = 13;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(&'static str),
    Empty,
}

fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest decimal that round-trips the value rounded to `SIG_DIGITS`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x);
    let mag = r.abs();
    if r == 0.0 {
        "0".into()
    } else if (1e-5..1e15).contains(&mag) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => (*s).to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => Number::from_f64(round_sig(*x)).map_or(Value::Null, Value::Number),
            Cell::Int(n) => Value::from(*n),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::from(*s),
            Cell::Empty => Value::Null,
        }
    }
}

/// A table plus optional summary fields. In CSV the summary is a trailing
/// `# key=value,...` line; in JSON the output becomes
/// `{"records": [...], <summary_key>: {...}}`.
#[derive(Debug, Clone)]
pub struct Report {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary_key: &'static str,
    pub summary: Vec<(&'static str, Cell)>,
}

impl Report {
    pub fn new(header: Vec<&'static str>) -> Self {
        Report {
            header,
            rows: Vec::new(),
            summary_key: "summary",
            summary: Vec::new(),
        }
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Csv => self.csv(),
            Format::Json => self.json(),
        }
    }

    fn csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(CliError::output)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text))
                .map_err(CliError::output)?;
        }
        let mut out = w
            .into_inner()
            .map_err(|e| CliError::output(e.into_error()))?;
        if !self.summary.is_empty() {
            let fields: Vec<String> = self
                .summary
                .iter()
                .map(|(k, v)| format!("{k}={}", v.text()))
                .collect();
            out.extend_from_slice(format!("# {}\n", fields.join(",")).as_bytes());
        }
        String::from_utf8(out).map_err(CliError::output)
    }

    fn json(&self) -> Result<String, CliError> {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(k, v)| ((*k).to_string(), v.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let value = if self.summary.is_empty() {
            Value::Array(records)
        } else {
            let summary: Map<String, Value> = self
                .summary
                .iter()
                .map(|(k, v)| ((*k).to_string(), v.json()))
                .collect();
            let mut top = Map::new();
            top.insert("records".into(), Value::Array(records));
            top.insert(self.summary_key.into(), Value::Object(summary));
            Value::Object(top)
        };
        let mut text = serde_json::to_string_pretty(&value).map_err(CliError::output)?;
        text.push('\n');
        Ok(text)
    }
}
