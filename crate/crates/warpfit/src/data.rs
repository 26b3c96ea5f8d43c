//! Shipped datasets: the beam-characterization event rates, the relative
//! manifestation-rate table, and per-workload issue rates. The CSV files
//! live under `data/` and are embedded here for programmatic use.

use crate::model::{parse_rate_table, RateTable};
use serde::{Deserialize, Serialize};

pub const TABLE2_CSV: &str = include_str!("../data/table2.csv");
pub const TABLE3_CSV: &str = include_str!("../data/table3.csv");
pub const TABLE4_CSV: &str = include_str!("../data/table4.csv");

/// One row of the event-rate dataset (normalized to the IADD benchmark).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRateRow {
    pub microbench: String,
    pub relative_fit: f64,
    pub hangs_crashes: Option<f64>,
    pub f_bits: Option<f64>,
    pub is_bits: Option<f64>,
}

/// The beam-campaign event rates per microbenchmark.
pub fn table2() -> Vec<EventRateRow> {
    TABLE2_CSV
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let opt = |s: &str| s.trim().parse::<f64>().ok();
            EventRateRow {
                microbench: f[0].trim().to_string(),
                relative_fit: f[1].trim().parse().expect("shipped data parses"),
                hangs_crashes: opt(f[2]),
                f_bits: opt(f[3]),
                is_bits: opt(f.get(4).copied().unwrap_or("")),
            }
        })
        .collect()
}

/// The relative manifestation-rate table (IPA rates, normalized to IMAD).
pub fn table3() -> RateTable {
    parse_rate_table(TABLE3_CSV).expect("shipped rate table is valid")
}

/// Per-workload issue rates.
pub fn table4() -> Vec<(String, f64)> {
    TABLE4_CSV
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .skip(1)
        .map(|line| {
            let (name, ipc) = line.split_once(',').expect("shipped data parses");
            (name.trim().to_string(), ipc.trim().parse().expect("shipped data parses"))
        })
        .collect()
}

pub fn issue_rate_of(workload: &str) -> Option<f64> {
    table4().into_iter().find(|(name, _)| name == workload).map(|(_, ipc)| ipc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ManifestationKind, Units};
    use crate::profile::InstructionClass;

    #[test]
    fn table3_parses_with_expected_rows() {
        let t = table3();
        assert_eq!(t.units, Units::Relative);
        assert_eq!(t.normalized_to, Some(InstructionClass::Imad));
        assert_eq!(t.rate(InstructionClass::Iadd, ManifestationKind::SingleBit), 0.54);
        assert_eq!(t.rate(InstructionClass::Bra, ManifestationKind::Crash), 0.21);
        assert_eq!(t.rate(InstructionClass::Ffma, ManifestationKind::TwoThreadRandom), 0.09);
        assert_eq!(t.class_total(InstructionClass::Imad), 1.0);
        assert_eq!(t.classes().len(), 7);
    }

    #[test]
    fn table4_has_the_reference_workloads() {
        assert_eq!(issue_rate_of("hotspot"), Some(3.49));
        assert_eq!(issue_rate_of("lud"), Some(0.13));
        assert_eq!(issue_rate_of("lavaMD"), Some(3.85));
        assert_eq!(table4().len(), 18);
    }

    #[test]
    fn table2_rows_are_complete() {
        let rows = table2();
        assert_eq!(rows.len(), 7);
        let iadd = &rows[0];
        assert_eq!(iadd.microbench, "IADD");
        assert_eq!(iadd.relative_fit, 1.0);
        assert_eq!(iadd.hangs_crashes, Some(0.71));
        assert_eq!(iadd.is_bits, None);
        let imad = rows.iter().find(|r| r.microbench == "IMAD").unwrap();
        assert_eq!(imad.is_bits, Some(0.14));
    }
}
