use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One query with a precomputed embedding and per-model correctness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingExample {
    pub query_id: String,
    pub embedding: Vec<f64>,
    pub outcomes: BTreeMap<String, u8>,
}

impl RoutingExample {
    pub fn validate(&self) -> Result<()> {
        if self.outcomes.is_empty() {
            return Err(Error::domain(format!("query `{}` has no outcomes", self.query_id)));
        }
        if let Some((m, v)) = self.outcomes.iter().find(|(_, &v)| v > 1) {
            return Err(Error::domain(format!(
                "query `{}`: outcome for `{m}` must be 0 or 1, got {v}",
                self.query_id
            )));
        }
        if self.embedding.is_empty() {
            return Err(Error::domain(format!("query `{}` has an empty embedding", self.query_id)));
        }
        if self.embedding.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding of query `{}`", self.query_id)));
        }
        Ok(())
    }

    /// Correctness of `model`; a missing outcome counts as incorrect.
    pub fn correct(&self, model: &str) -> bool {
        self.outcomes.get(model) == Some(&1)
    }
}

pub fn read_examples(path: impl AsRef<Path>) -> Result<Vec<RoutingExample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let ex: RoutingExample = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        ex.validate().map_err(|e| parse_err(e.to_string()))?;
        if let Some(first) = out.first() {
            let first: &RoutingExample = first;
            if first.embedding.len() != ex.embedding.len() {
                return Err(parse_err(format!(
                    "embedding length {} differs from {}",
                    ex.embedding.len(),
                    first.embedding.len()
                )));
            }
        }
        out.push(ex);
    }
    Ok(out)
}

pub fn write_examples(path: impl AsRef<Path>, examples: &[RoutingExample]) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for ex in examples {
        serde_json::to_writer(&mut f, ex)?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}
