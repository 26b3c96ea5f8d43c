//! Rate tables: per (instruction class, manifestation) error-manifestation
//! rates, parsed from a small CSV dialect.
//!
//! Format: comment lines start with `#`; a leading comment block may carry
//! `units=absolute|relative` and `normalized_to=<class>` directives; then a
//! `class,manifestation,rate` header; one `class,TOTAL,rate` row per class
//! whose manifestation rows must sum to it.

use super::manifestation::ManifestationKind;
use crate::profile::{InstructionClass, MODELED_CLASSES};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Rates are FIT per issued instruction (failures per 1e9 device-hours).
    Absolute,
    /// Rates are ratios against a reference class; usable for ranking only.
    Relative,
}

/// Relative row sums may carry the rounding of their source data; this is
/// the accepted slack for `sum(manifestations) == TOTAL` per class.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub units: Units,
    pub normalized_to: Option<InstructionClass>,
    rows: BTreeMap<(InstructionClass, ManifestationKind), f64>,
    totals: BTreeMap<InstructionClass, f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RateTableError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown class `{name}`")]
    UnknownClass { line: usize, name: String },
    #[error("line {line}: unknown manifestation `{name}`")]
    UnknownManifestation { line: usize, name: String },
    #[error("line {line}: negative rate {rate}")]
    NegativeRate { line: usize, rate: f64 },
    #[error("line {line}: duplicate row for {class}/{manifestation}")]
    DuplicateRow { line: usize, class: InstructionClass, manifestation: String },
    #[error("class {class}: row-sum violation: manifestations sum to {got}, TOTAL row says {expected}")]
    RowSum { class: InstructionClass, expected: f64, got: f64 },
    #[error("class {class}: missing TOTAL row")]
    MissingTotal { class: InstructionClass },
    #[error("table has no rate rows")]
    Empty,
}

pub fn parse_rate_table(text: &str) -> Result<RateTable, RateTableError> {
    let mut units = Units::Relative;
    let mut normalized_to = None;
    let mut rows: BTreeMap<(InstructionClass, ManifestationKind), f64> = BTreeMap::new();
    let mut totals: BTreeMap<InstructionClass, f64> = BTreeMap::new();
    let mut total_lines: BTreeMap<InstructionClass, usize> = BTreeMap::new();
    let mut header_seen = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("units=") {
                units = match v.trim() {
                    "absolute" => Units::Absolute,
                    "relative" => Units::Relative,
                    other => {
                        return Err(RateTableError::Syntax {
                            line: line_no,
                            msg: format!("unknown units `{other}`"),
                        })
                    }
                };
            } else if let Some(v) = comment.strip_prefix("normalized_to=") {
                let name = v.trim();
                normalized_to =
                    Some(InstructionClass::from_name(name).ok_or(RateTableError::UnknownClass {
                        line: line_no,
                        name: name.to_string(),
                    })?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !header_seen {
            if fields != ["class", "manifestation", "rate"] {
                return Err(RateTableError::Syntax {
                    line: line_no,
                    msg: "expected header `class,manifestation,rate`".into(),
                });
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 3 {
            return Err(RateTableError::Syntax {
                line: line_no,
                msg: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let class = InstructionClass::from_name(fields[0])
            .filter(|c| MODELED_CLASSES.contains(c))
            .ok_or(RateTableError::UnknownClass { line: line_no, name: fields[0].to_string() })?;
        let rate: f64 = fields[2].parse().map_err(|_| RateTableError::Syntax {
            line: line_no,
            msg: format!("bad rate `{}`", fields[2]),
        })?;
        if rate < 0.0 {
            return Err(RateTableError::NegativeRate { line: line_no, rate });
        }
        if fields[1] == "TOTAL" {
            if totals.insert(class, rate).is_some() {
                return Err(RateTableError::DuplicateRow {
                    line: line_no,
                    class,
                    manifestation: "TOTAL".into(),
                });
            }
            total_lines.insert(class, line_no);
        } else {
            let kind = ManifestationKind::from_name(fields[1]).ok_or(
                RateTableError::UnknownManifestation { line: line_no, name: fields[1].to_string() },
            )?;
            if rows.insert((class, kind), rate).is_some() {
                return Err(RateTableError::DuplicateRow {
                    line: line_no,
                    class,
                    manifestation: kind.name().into(),
                });
            }
        }
    }

    if rows.is_empty() {
        return Err(RateTableError::Empty);
    }
    // Every class with manifestation rows needs a consistent TOTAL row.
    let classes: Vec<InstructionClass> = {
        let mut cs: Vec<_> = rows.keys().map(|(c, _)| *c).collect();
        cs.sort_unstable();
        cs.dedup();
        cs
    };
    for class in classes {
        let expected = *totals.get(&class).ok_or(RateTableError::MissingTotal { class })?;
        let got: f64 = rows.iter().filter(|((c, _), _)| *c == class).map(|(_, r)| r).sum();
        let scale = expected.abs().max(1.0);
        if (got - expected).abs() > ROW_SUM_TOLERANCE * scale {
            return Err(RateTableError::RowSum { class, expected, got });
        }
    }

    Ok(RateTable { units, normalized_to, rows, totals })
}

impl RateTable {
    /// Build a table programmatically; rows are (class, manifestation, rate).
    /// Totals are derived from the rows.
    pub fn from_rows(
        units: Units,
        rows: impl IntoIterator<Item = (InstructionClass, ManifestationKind, f64)>,
    ) -> Result<RateTable, RateTableError> {
        let mut map = BTreeMap::new();
        let mut totals: BTreeMap<InstructionClass, f64> = BTreeMap::new();
        for (class, kind, rate) in rows {
            if rate < 0.0 {
                return Err(RateTableError::NegativeRate { line: 0, rate });
            }
            map.insert((class, kind), rate);
        }
        if map.is_empty() {
            return Err(RateTableError::Empty);
        }
        for ((class, _), rate) in &map {
            *totals.entry(*class).or_insert(0.0) += rate;
        }
        Ok(RateTable { units, normalized_to: None, rows: map, totals })
    }

    pub fn rate(&self, class: InstructionClass, kind: ManifestationKind) -> f64 {
        self.rows.get(&(class, kind)).copied().unwrap_or(0.0)
    }

    pub fn class_total(&self, class: InstructionClass) -> f64 {
        self.totals.get(&class).copied().unwrap_or(0.0)
    }

    /// Manifestation rows of one class, in manifestation order.
    pub fn class_rows(&self, class: InstructionClass) -> Vec<(ManifestationKind, f64)> {
        self.rows
            .iter()
            .filter(move |((c, _), _)| *c == class)
            .map(|((_, m), r)| (*m, *r))
            .collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = (InstructionClass, ManifestationKind, f64)> + '_ {
        self.rows.iter().map(|((c, m), r)| (*c, *m, *r))
    }

    pub fn classes(&self) -> Vec<InstructionClass> {
        self.totals.keys().copied().collect()
    }

    /// Convert a relative table to absolute FIT by multiplying every rate by
    /// the absolute FIT-per-issued-instruction of the normalization
    /// reference class.
    pub fn calibrate(&self, reference_fit: f64) -> RateTable {
        assert!(reference_fit > 0.0, "calibration constant must be positive");
        let rows = self.rows.iter().map(|(k, r)| (*k, r * reference_fit)).collect();
        let totals = self.totals.iter().map(|(k, r)| (*k, r * reference_fit)).collect();
        RateTable { units: Units::Absolute, normalized_to: None, rows, totals }
    }
}
