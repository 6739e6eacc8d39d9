//! Result tables and their CSV / JSON renderings.

use serde_json::{json, Map, Value as Json};

use crate::config::Format;
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    Null,
}

impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Int(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        if x.is_finite() {
            // drop the sign of −0.0
            Value::Float(x + 0.0)
        } else {
            Value::Null
        }
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}

impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Str(x.to_string())
    }
}

impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::Str(x)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(x: Option<T>) -> Self {
        x.map_or(Value::Null, Into::into)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metadata {
    pub tool: String,
    pub command: String,
    /// Resolved configuration; feeding it back through `--config` reproduces the table.
    pub config: Json,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub metadata: Metadata,
}

/// C-style `%.12e`: at least two exponent digits, explicit sign.
pub fn format_float(x: f64) -> String {
    let s = format!("{:.12e}", x + 0.0);
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let e: i32 = exp.parse().expect("integer exponent");
    let sign = if e < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", e.abs())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Float(x) => format_float(*x),
        Value::Str(s) => csv_field(s),
        Value::Bool(b) => b.to_string(),
        Value::Null => String::new(),
    }
}

fn to_json_value(v: &Value) -> Json {
    match v {
        Value::Int(i) => json!(i),
        Value::Float(x) => json!(x),
        Value::Str(s) => json!(s),
        Value::Bool(b) => json!(b),
        Value::Null => Json::Null,
    }
}

fn from_json_value(v: &Json) -> Result<Value, CliError> {
    Ok(match v {
        Json::Null => Value::Null,
        Json::Bool(b) => Value::Bool(*b),
        Json::String(s) => Value::Str(s.clone()),
        Json::Number(n) if n.is_f64() => Value::Float(n.as_f64().expect("f64")),
        Json::Number(n) => Value::Int(n.as_i64().ok_or_else(|| CliError::Config(format!("integer {n} out of range")))?),
        other => return Err(CliError::Config(format!("unexpected cell {other}"))),
    })
}

impl ResultTable {
    pub fn new(command: &str, config: Json, columns: &[&str]) -> Self {
        ResultTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            metadata: Metadata {
                tool: format!("bosonize {}", env!("CARGO_PKG_VERSION")),
                command: command.to_string(),
                config,
            },
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# tool={}\n", self.metadata.tool));
        out.push_str(&format!("# command={}\n", self.metadata.command));
        out.push_str(&format!("# config={}\n", self.metadata.config));
        out.push_str(&self.columns.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(csv_cell).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut data = Map::new();
        for (i, c) in self.columns.iter().enumerate() {
            data.insert(c.clone(), Json::Array(self.rows.iter().map(|r| to_json_value(&r[i])).collect()));
        }
        let doc = json!({
            "metadata": {
                "tool": self.metadata.tool,
                "command": self.metadata.command,
                "config": self.metadata.config,
            },
            "columns": self.columns,
            "data": data,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let doc: Json = serde_json::from_str(text).map_err(|e| CliError::Config(format!("table: {e}")))?;
        let bad = |what: &str| CliError::Config(format!("table: missing or malformed {what}"));
        let meta = doc.get("metadata").ok_or_else(|| bad("metadata"))?;
        let text_of = |k: &str| meta.get(k).and_then(Json::as_str).map(str::to_string).ok_or_else(|| bad(k));
        let columns: Vec<String> = doc
            .get("columns")
            .and_then(Json::as_array)
            .ok_or_else(|| bad("columns"))?
            .iter()
            .map(|c| c.as_str().map(str::to_string).ok_or_else(|| bad("column name")))
            .collect::<Result<_, _>>()?;
        let data = doc.get("data").and_then(Json::as_object).ok_or_else(|| bad("data"))?;
        let cols: Vec<&Vec<Json>> = columns
            .iter()
            .map(|c| data.get(c).and_then(Json::as_array).ok_or_else(|| bad(c)))
            .collect::<Result<_, _>>()?;
        let n = cols.first().map_or(0, |c| c.len());
        if cols.iter().any(|c| c.len() != n) {
            return Err(bad("column lengths"));
        }
        let rows = (0..n)
            .map(|i| cols.iter().map(|c| from_json_value(&c[i])).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        Ok(ResultTable {
            columns,
            rows,
            metadata: Metadata {
                tool: text_of("tool")?,
                command: text_of("command")?,
                config: meta.get("config").cloned().ok_or_else(|| bad("config"))?,
            },
        })
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}
