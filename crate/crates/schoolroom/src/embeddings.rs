//! The embedding file contract shared with the transcript encoder.
//!
//! JSONL: a header line `{model_name, dim, count}` followed by `count`
//! records `{id, role, dim?, values}` whose values have unit L2 norm.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use schoolroom_core::pairing::Role;
use serde::{Deserialize, Serialize};

use crate::manifest::write_jsonl;
use crate::{Error, Result};

/// Allowed deviation of a stored vector's norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingHeader {
    pub model_name: String,
    pub dim: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRecord {
    pub id: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub header: EmbeddingHeader,
    pub records: Vec<EmbeddingRecord>,
}

/// One broken rule; `line` is 1-based, counting the header as line 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl EmbeddingFile {
    /// Every contract violation, in file order. Empty means valid.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut flag = |line: usize, message: String| out.push(Violation { line, message });
        if self.header.dim == 0 {
            flag(1, "header dim must be positive".into());
        }
        if self.header.count != self.records.len() {
            flag(
                1,
                format!("header count {} but {} records", self.header.count, self.records.len()),
            );
        }
        let mut seen = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            let line = i + 2;
            if !seen.insert(r.id.as_str()) {
                flag(line, format!("duplicate id {}", r.id));
            }
            if r.values.len() != self.header.dim {
                flag(
                    line,
                    format!("{}: {} values, header dim {}", r.id, r.values.len(), self.header.dim),
                );
            }
            if let Some(d) = r.dim.filter(|d| *d != r.values.len()) {
                flag(line, format!("{}: dim field {d} but {} values", r.id, r.values.len()));
            }
            if r.values.iter().any(|v| !v.is_finite()) {
                flag(line, format!("{}: non-finite value", r.id));
                continue;
            }
            let norm = r.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                flag(line, format!("{}: norm {norm} is not 1", r.id));
            }
        }
        out
    }
}

/// Parse without validating.
pub fn parse_embeddings(path: &Path) -> Result<EmbeddingFile> {
    if !path.is_file() {
        return Err(Error::MissingInput(path.into()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let parse_err = |line: usize, e: serde_json::Error| Error::Format {
        path: path.into(),
        line: line + 1,
        message: e.to_string(),
    };
    let (hl, header) = lines.next().ok_or_else(|| Error::Format {
        path: path.into(),
        line: 1,
        message: "missing header".into(),
    })?;
    let header = serde_json::from_str(header).map_err(|e| parse_err(hl, e))?;
    let records = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| parse_err(i, e)))
        .collect::<Result<_>>()?;
    Ok(EmbeddingFile { header, records })
}

/// Parse and validate; any violation is an error naming the first one.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingFile> {
    let file = parse_embeddings(path)?;
    if let Some(v) = file.violations().into_iter().next() {
        return Err(Error::Format {
            path: path.into(),
            line: v.line,
            message: v.message,
        });
    }
    Ok(file)
}

pub fn write_embeddings(path: &Path, file: &EmbeddingFile) -> Result<()> {
    let header = serde_json::to_value(&file.header).map_err(|e| Error::io(path, e.into()))?;
    let records = file
        .records
        .iter()
        .map(|r| serde_json::to_value(r).expect("records serialize"));
    write_jsonl(path, std::iter::once(header).chain(records))
}
