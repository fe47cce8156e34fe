//! Examples, corpus splits and the tab-separated dataset files.
//!
//! Line formats (UTF-8, `\t` separated):
//! * labeled:       `query \t title \t label`
//! * soft-labeled:  `query \t title \t label \t logit0 \t logit1`
//!   (`-` in the label column when no hard label exists)
//! * unlabeled:     `query \t title`
//!
//! Logits are written with the shortest decimal form that round-trips the
//! exact double value, so rewriting a file is byte-identical.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A query-title pair with an optional hard label and optional teacher logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub query: String,
    pub title: String,
    pub label: Option<u8>,
    pub teacher_logits: Option<[f64; 2]>,
}

impl Example {
    pub fn labeled(query: impl Into<String>, title: impl Into<String>, label: u8) -> Self {
        Self {
            query: query.into(),
            title: title.into(),
            label: Some(label),
            teacher_logits: None,
        }
    }

    pub fn unlabeled(query: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            title: title.into(),
            label: None,
            teacher_logits: None,
        }
    }

    pub fn to_tsv_line(&self) -> String {
        match (self.label, self.teacher_logits) {
            (Some(l), Some([a, b])) => {
                format!("{}\t{}\t{}\t{}\t{}", self.query, self.title, l, a, b)
            }
            (None, Some([a, b])) => format!("{}\t{}\t-\t{}\t{}", self.query, self.title, a, b),
            (Some(l), None) => format!("{}\t{}\t{}", self.query, self.title, l),
            (None, None) => format!("{}\t{}", self.query, self.title),
        }
    }

    pub fn from_tsv_line(line: &str, lineno: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        let malformed = |msg: &str| Error::MalformedData {
            line: lineno,
            msg: msg.to_string(),
        };
        let parse_label = |s: &str| -> Result<Option<u8>> {
            match s {
                "-" => Ok(None),
                "0" => Ok(Some(0)),
                "1" => Ok(Some(1)),
                other => Err(malformed(&format!("label must be 0, 1 or -, got {other}"))),
            }
        };
        let parse_logit = |s: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| malformed(&format!("bad logit {s}")))?;
            if !v.is_finite() {
                return Err(malformed("non-finite teacher logit"));
            }
            Ok(v)
        };
        match fields.as_slice() {
            [q, t] => Ok(Example::unlabeled(*q, *t)),
            [q, t, l] => Ok(Example {
                query: (*q).to_string(),
                title: (*t).to_string(),
                label: Some(
                    parse_label(l)?.ok_or_else(|| malformed("missing label in 3-field line"))?,
                ),
                teacher_logits: None,
            }),
            [q, t, l, a, b] => Ok(Example {
                query: (*q).to_string(),
                title: (*t).to_string(),
                label: parse_label(l)?,
                teacher_logits: Some([parse_logit(a)?, parse_logit(b)?]),
            }),
            _ => Err(malformed(&format!("expected 2, 3 or 5 fields, got {}", fields.len()))),
        }
    }
}

pub fn write_examples(path: impl AsRef<Path>, examples: &[Example]) -> Result<()> {
    let mut out = String::new();
    for e in examples {
        out.push_str(&e.to_tsv_line());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_examples(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let content = fs::read_to_string(path)?;
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| Example::from_tsv_line(l, i + 1))
        .collect()
}

pub fn positive_rate(examples: &[Example]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let pos = examples.iter().filter(|e| e.label == Some(1)).count();
    pos as f64 / examples.len() as f64
}

/// Train / development / test splits, pairwise disjoint on (query, title).
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub train: Vec<Example>,
    pub dev: Vec<Example>,
    pub test: Vec<Example>,
}

impl CorpusSplit {
    pub fn positive_rates(&self) -> [f64; 3] {
        [
            positive_rate(&self.train),
            positive_rate(&self.dev),
            positive_rate(&self.test),
        ]
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_examples(dir.join("train.tsv"), &self.train)?;
        write_examples(dir.join("dev.tsv"), &self.dev)?;
        write_examples(dir.join("test.tsv"), &self.test)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(Self {
            train: read_examples(dir.join("train.tsv"))?,
            dev: read_examples(dir.join("dev.tsv"))?,
            test: read_examples(dir.join("test.tsv"))?,
        })
    }
}
