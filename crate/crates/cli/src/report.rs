//! Rendering of a serializable result as a table, one-row CSV, or JSON.

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

/// A result flattened to dotted keys, keeping the original JSON value.
pub struct Report {
    value: Value,
    fields: Vec<(String, Value)>,
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, Value)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

fn cell(v: &Value, pretty: bool) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) if pretty && !(n.is_u64() || n.is_i64()) => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            if x == 0.0 || (1e-3..1e7).contains(&x.abs()) {
                format!("{x:.7}")
            } else {
                format!("{x:.6e}")
            }
        }
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Report {
    pub fn from_serialize<T: Serialize>(item: &T) -> anyhow::Result<Self> {
        let value = serde_json::to_value(item)?;
        let mut fields = Vec::new();
        flatten("", &value, &mut fields);
        Ok(Self { value, fields })
    }

    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        Ok(match format {
            Format::Json => serde_json::to_string_pretty(&self.value)? + "\n",
            Format::Table => {
                let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                self.fields
                    .iter()
                    .map(|(k, v)| format!("{k:<width$}  {}\n", cell(v, true)))
                    .collect()
            }
            Format::Csv => {
                let header: Vec<&str> = self.fields.iter().map(|(k, _)| k.as_str()).collect();
                let row: Vec<String> = self.fields.iter().map(|(_, v)| cell(v, false)).collect();
                format!("{}\n{}\n", header.join(","), row.join(","))
            }
        })
    }

    pub fn print(&self, format: Format) -> anyhow::Result<()> {
        print!("{}", self.render(format)?);
        Ok(())
    }
}
