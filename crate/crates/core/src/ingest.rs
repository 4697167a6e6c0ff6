//! Canonical dataset files and raw numeric-matrix import.
//!
//! The canonical file is plain UTF-8 text:
//!
//! ```text
//! setting_a,setting_b,outcome_a,outcome_b
//! 0,1,1,-1
//! ```
//!
//! Parsing is strict. Every data line becomes exactly one trial or the whole
//! read fails with the 1-based line number of the first defect; nothing is
//! skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{Dataset, Outcome, Setting, Trial};

pub const CANONICAL_HEADER: &str = "setting_a,setting_b,outcome_a,outcome_b";

const FIELD_NAMES: [&str; 4] = ["setting_a", "setting_b", "outcome_a", "outcome_b"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header, line 1: expected `{CANONICAL_HEADER}`, found `{found}`")]
    Header { found: String },
    #[error("{field} not binary, line {line}: found `{value}`")]
    SettingNotBinary {
        field: &'static str,
        line: usize,
        value: String,
    },
    #[error("{field} outside {encoding} encoding, line {line}: found `{value}`")]
    OutcomeOutOfRange {
        field: &'static str,
        encoding: OutcomeEncoding,
        line: usize,
        value: String,
    },
    #[error("short row, line {line}: expected {expected} fields, found {found}")]
    ShortRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("extra fields, line {line}: expected {expected} fields, found {found}")]
    ExtraFields {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("empty row, line {line}")]
    EmptyRow { line: usize },
    #[error("non-numeric field, line {line}, column {column}: found `{value}`")]
    NonNumeric {
        line: usize,
        column: usize,
        value: String,
    },
    #[error("column {index} out of range, line {line}: row has {width} columns")]
    ColumnOutOfRange {
        line: usize,
        index: usize,
        width: usize,
    },
    #[error("inconsistent row width, line {line}: expected {expected} columns, found {found}")]
    InconsistentWidth {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate column {index} in column map")]
    DuplicateColumn { index: usize },
}

/// How outcome columns of a raw matrix are encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeEncoding {
    /// Outcomes stored as `-1` / `1`.
    PlusMinusOne,
    /// Outcomes stored as `0` / `1`, decoded `0 -> -1` and `1 -> +1`.
    ZeroOne,
}

impl OutcomeEncoding {
    fn decode(self, value: f64) -> Option<Outcome> {
        match self {
            OutcomeEncoding::PlusMinusOne if value == 1.0 => Some(Outcome::Plus),
            OutcomeEncoding::PlusMinusOne if value == -1.0 => Some(Outcome::Minus),
            OutcomeEncoding::ZeroOne if value == 1.0 => Some(Outcome::Plus),
            OutcomeEncoding::ZeroOne if value == 0.0 => Some(Outcome::Minus),
            _ => None,
        }
    }
}

impl std::fmt::Display for OutcomeEncoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutcomeEncoding::PlusMinusOne => "pm1",
            OutcomeEncoding::ZeroOne => "zo",
        })
    }
}

/// Which 0-based matrix columns hold the two settings and two outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    col_setting_a: usize,
    col_setting_b: usize,
    col_outcome_a: usize,
    col_outcome_b: usize,
    encoding: OutcomeEncoding,
}

impl ColumnMap {
    pub fn new(
        col_setting_a: usize,
        col_setting_b: usize,
        col_outcome_a: usize,
        col_outcome_b: usize,
        encoding: OutcomeEncoding,
    ) -> Result<Self, IngestError> {
        let cols = [col_setting_a, col_setting_b, col_outcome_a, col_outcome_b];
        for (i, c) in cols.iter().enumerate() {
            if cols[..i].contains(c) {
                return Err(IngestError::DuplicateColumn { index: *c });
            }
        }
        Ok(ColumnMap {
            col_setting_a,
            col_setting_b,
            col_outcome_a,
            col_outcome_b,
            encoding,
        })
    }

    pub fn columns(&self) -> [usize; 4] {
        [
            self.col_setting_a,
            self.col_setting_b,
            self.col_outcome_a,
            self.col_outcome_b,
        ]
    }

    pub fn encoding(&self) -> OutcomeEncoding {
        self.encoding
    }

    fn max_column(&self) -> usize {
        self.columns().into_iter().max().unwrap_or(0)
    }
}

/// Lines with their 1-based numbers. A single trailing newline does not
/// produce an extra line; blank lines elsewhere are kept so they can be rejected.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let empty = text.is_empty();
    body.split('\n')
        .filter(move |_| !empty)
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .map(|(i, l)| (i + 1, l))
}

fn parse_setting(field: &'static str, raw: &str, line: usize) -> Result<Setting, IngestError> {
    match raw {
        "0" => Ok(Setting::Zero),
        "1" => Ok(Setting::One),
        _ => Err(IngestError::SettingNotBinary {
            field,
            line,
            value: raw.to_string(),
        }),
    }
}

fn parse_outcome(field: &'static str, raw: &str, line: usize) -> Result<Outcome, IngestError> {
    match raw {
        "1" | "+1" => Ok(Outcome::Plus),
        "-1" => Ok(Outcome::Minus),
        _ => Err(IngestError::OutcomeOutOfRange {
            field,
            encoding: OutcomeEncoding::PlusMinusOne,
            line,
            value: raw.to_string(),
        }),
    }
}

/// Parses canonical-format text.
pub fn parse_canonical(text: &str) -> Result<Dataset, IngestError> {
    let mut lines = numbered_lines(text);
    match lines.next() {
        Some((_, header)) if header == CANONICAL_HEADER => {}
        Some((_, header)) => {
            return Err(IngestError::Header {
                found: header.to_string(),
            })
        }
        None => {
            return Err(IngestError::Header {
                found: String::new(),
            })
        }
    }

    let mut trials = Vec::new();
    for (line, row) in lines {
        if row.trim().is_empty() {
            return Err(IngestError::EmptyRow { line });
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() < 4 {
            return Err(IngestError::ShortRow {
                line,
                expected: 4,
                found: fields.len(),
            });
        }
        if fields.len() > 4 {
            return Err(IngestError::ExtraFields {
                line,
                expected: 4,
                found: fields.len(),
            });
        }
        trials.push(Trial::new(
            parse_setting(FIELD_NAMES[0], fields[0], line)?,
            parse_setting(FIELD_NAMES[1], fields[1], line)?,
            parse_outcome(FIELD_NAMES[2], fields[2], line)?,
            parse_outcome(FIELD_NAMES[3], fields[3], line)?,
        ));
    }
    Ok(Dataset::new(trials))
}

pub fn render_canonical(d: &Dataset) -> String {
    let mut out = String::with_capacity(CANONICAL_HEADER.len() + 1 + d.len() * 9);
    out.push_str(CANONICAL_HEADER);
    out.push('\n');
    for t in d.trials() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            t.setting_a.index(),
            t.setting_b.index(),
            t.outcome_a.sign(),
            t.outcome_b.sign()
        );
    }
    out
}

pub fn read_canonical(path: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IngestError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_canonical(&text)
}

pub fn write_canonical(d: &Dataset, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    fs::write(path, render_canonical(d)).map_err(|source| IngestError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a headerless numeric matrix (comma- or whitespace-delimited) through `map`.
pub fn parse_matrix(text: &str, map: &ColumnMap) -> Result<Dataset, IngestError> {
    let lines: Vec<(usize, &str)> = numbered_lines(text).collect();
    // trailing blank lines are not rows
    let last_data = lines
        .iter()
        .rposition(|(_, l)| !l.trim().is_empty())
        .map_or(0, |i| i + 1);

    let mut width = None;
    let mut trials = Vec::with_capacity(last_data);
    for &(line, row) in &lines[..last_data] {
        if row.trim().is_empty() {
            return Err(IngestError::EmptyRow { line });
        }
        let fields: Vec<&str> = if row.contains(',') {
            row.split(',').map(str::trim).collect()
        } else {
            row.split_whitespace().collect()
        };
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(IngestError::InconsistentWidth {
                    line,
                    expected: w,
                    found: fields.len(),
                })
            }
            Some(_) => {}
        }
        if map.max_column() >= fields.len() {
            return Err(IngestError::ColumnOutOfRange {
                line,
                index: map.max_column(),
                width: fields.len(),
            });
        }
        let mut values = [0.0f64; 4];
        for (slot, &col) in values.iter_mut().zip(map.columns().iter()) {
            *slot = fields[col]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::NonNumeric {
                    line,
                    column: col,
                    value: fields[col].to_string(),
                })?;
        }
        let setting = |i: usize| -> Result<Setting, IngestError> {
            match values[i] {
                v if v == 0.0 => Ok(Setting::Zero),
                v if v == 1.0 => Ok(Setting::One),
                _ => Err(IngestError::SettingNotBinary {
                    field: FIELD_NAMES[i],
                    line,
                    value: fields[map.columns()[i]].to_string(),
                }),
            }
        };
        let outcome = |i: usize| -> Result<Outcome, IngestError> {
            map.encoding
                .decode(values[i])
                .ok_or_else(|| IngestError::OutcomeOutOfRange {
                    field: FIELD_NAMES[i],
                    encoding: map.encoding,
                    line,
                    value: fields[map.columns()[i]].to_string(),
                })
        };
        trials.push(Trial::new(setting(0)?, setting(1)?, outcome(2)?, outcome(3)?));
    }
    Ok(Dataset::new(trials))
}

pub fn import_matrix(path: impl AsRef<Path>, map: &ColumnMap) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IngestError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix(&text, map)
}
