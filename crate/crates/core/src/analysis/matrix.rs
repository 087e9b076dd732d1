use std::io::{Read, Write};
use std::path::Path;

use crate::dna::{dna_distance, DnaRecord};
use crate::error::{Error, Result};
use crate::extraction::DnaStore;
use crate::util::fmt_sig;

/// Labeled symmetric distance matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds from a full row-major `n x n` matrix, validating symmetry,
    /// a zero diagonal, finiteness and non-negativity.
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                context: "distance matrix",
                expected: n * n,
                actual: values.len(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::domain(format!("duplicate label `{l}`")));
            }
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::domain(format!("diagonal entry for `{}` is not zero", labels[i])));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() {
                    return Err(Error::NonFinite("distance matrix".into()));
                }
                if v < 0.0 {
                    return Err(Error::domain("distances must be non-negative"));
                }
                if v != values[j * n + i] {
                    return Err(Error::domain(format!(
                        "matrix is not symmetric at ({}, {})",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        Ok(Self { labels, values })
    }

    /// Builds from a function evaluated once per unordered pair.
    pub fn from_fn(labels: Vec<String>, mut f: impl FnMut(usize, usize) -> Result<f64>) -> Result<Self> {
        let n = labels.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = f(i, j)?;
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Self::new(labels, values)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Entries above the diagonal in row-major order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Reorders rows and columns; `order[k]` is the old index placed at `k`.
    pub fn reorder(&self, order: &[usize]) -> Self {
        let n = self.len();
        let labels = order.iter().map(|&i| self.labels[i].clone()).collect();
        let mut values = vec![0.0; n * n];
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                values[a * n + b] = self.get(i, j);
            }
        }
        Self { labels, values }
    }

    /// Same matrix with labels in lexicographic order.
    pub fn sorted(&self) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.labels[a].cmp(&self.labels[b]));
        self.reorder(&order)
    }

    /// CSV with a label header row and label first column; 9 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        out.write_record(&header).map_err(csv_err)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend(self.row(i).iter().map(|v| fmt_sig(*v, 9)));
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(r: R, source: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
        let mut rows = reader.records();
        let parse_err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let header = rows
            .next()
            .ok_or_else(|| parse_err(1, "empty file".into()))?
            .map_err(|e| parse_err(1, e.to_string()))?;
        let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| parse_err(line, e.to_string()))?;
            if i >= n {
                return Err(parse_err(line, "more rows than labels".into()));
            }
            if row.get(0) != Some(labels[i].as_str()) {
                return Err(parse_err(line, format!("row label does not match column `{}`", labels[i])));
            }
            if row.len() != n + 1 {
                return Err(parse_err(line, format!("expected {} fields, found {}", n + 1, row.len())));
            }
            for field in row.iter().skip(1) {
                values.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(line, format!("`{field}`: {e}")))?,
                );
            }
        }
        if values.len() != n * n {
            return Err(parse_err(n + 1, format!("expected {n} data rows")));
        }
        Self::new(labels, values)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, &path.display().to_string())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::domain(format!("csv: {e}"))
}

/// Pairwise DNA distances with labels sorted lexicographically.
pub fn distance_matrix(store: &DnaStore) -> Result<DistanceMatrix> {
    let mut records: Vec<&DnaRecord> = store.records().collect();
    distance_matrix_of(&mut records)
}

pub fn distance_matrix_of(records: &mut [&DnaRecord]) -> Result<DistanceMatrix> {
    if records.len() < 2 {
        return Err(Error::domain("a distance matrix needs at least two records"));
    }
    records.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    let labels = records.iter().map(|r| r.model_id.clone()).collect();
    DistanceMatrix::from_fn(labels, |i, j| dna_distance(records[i], records[j]))
}
