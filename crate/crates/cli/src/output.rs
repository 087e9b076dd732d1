//! One result document per run, as JSON or as `key: value` text.
//!
//! Both modes render numbers through the same rounding and the same
//! `serde_json` number formatting, so they always agree digit for digit.

use clap::ValueEnum;
use llm_dna::util::round_sig;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::config::Settings;

/// Significant digits kept in reported floats.
const DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Text => "text",
            Format::Json => "json",
        }
    }
}

pub struct Report {
    command: String,
    config: Map<String, Value>,
    result: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str, settings: &Settings) -> Self {
        let Value::Object(config) = settings.echo() else {
            unreachable!("settings echo is an object")
        };
        Self {
            command: command.to_string(),
            config,
            result: Map::new(),
        }
    }

    /// Adds a resolved option to the header.
    pub fn config(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.config.insert(key.to_string(), value.into());
        self
    }

    pub fn result(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.result.insert(key.to_string(), value.into());
        self
    }

    /// Adds every field of a serializable value to the result.
    pub fn result_fields<T: serde::Serialize>(&mut self, value: &T) -> anyhow::Result<&mut Self> {
        match serde_json::to_value(value)? {
            Value::Object(m) => self.result.extend(m),
            other => anyhow::bail!("expected an object, got {other}"),
        }
        Ok(self)
    }

    pub fn to_json(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("command".into(), Value::String(self.command.clone()));
        doc.insert("config".into(), round(Value::Object(self.config.clone())));
        doc.insert("result".into(), round(Value::Object(self.result.clone())));
        Value::Object(doc)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# command: {}\n", self.command);
        let mut header = Vec::new();
        flatten("", &round(Value::Object(self.config.clone())), &mut header);
        for (k, v) in header {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut body = Vec::new();
        flatten("", &round(Value::Object(self.result.clone())), &mut body);
        for (k, v) in body {
            out.push_str(&format!("{k}: {v}\n"));
        }
        out
    }

    pub fn emit(&self, format: Format) {
        match format {
            Format::Json => println!("{}", serde_json::to_string_pretty(&self.to_json()).expect("values serialize")),
            Format::Text => print!("{}", self.to_text()),
        }
    }
}

fn round(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            serde_json::Number::from_f64(round_sig(x, DIGITS)).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round(v))).collect()),
        other => other,
    }
}

/// Nested objects become dotted keys; arrays of scalars stay inline as JSON.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), "-".to_string())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
