//! Artifact provenance and rendering helpers: every file the tool writes
//! embeds the tool version, a digest of the effective configuration, and the
//! seed, so artifacts are reproducible and self-describing. No timestamps:
//! identical runs must produce identical bytes.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(config_digest: String, seed: Option<u64>) -> Provenance {
        Provenance {
            tool: "warpfit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_digest,
            seed,
        }
    }
}

/// Hex SHA-256 over the canonical byte representation of the inputs that
/// shape an artifact (file contents and semantic parameters, not paths or
/// parallelism settings).
pub fn config_digest(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Fixed-width text table for the human-readable side of reports.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i < widths.len() {
                widths[i] = widths[i].max(cell.len());
            }
        }
    }
    let mut out = String::new();
    let fmt_row = |cells: Vec<String>, widths: &[usize]| -> String {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    out.push_str(&fmt_row(headers.iter().map(|h| h.to_string()).collect(), &widths));
    out.push('\n');
    out.push_str(&fmt_row(widths.iter().map(|w| "-".repeat(*w)).collect(), &widths));
    out.push('\n');
    for row in rows {
        out.push_str(&fmt_row(row.clone(), &widths));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_order_sensitive() {
        let a = config_digest(&[b"alpha", b"beta"]);
        let b = config_digest(&[b"alpha", b"beta"]);
        let c = config_digest(&[b"beta", b"alpha"]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn digest_is_not_confusable_across_boundaries() {
        assert_ne!(config_digest(&[b"ab", b"c"]), config_digest(&[b"a", b"bc"]));
    }

    #[test]
    fn tables_align() {
        let t = render_table(
            &["class", "rate"],
            &[vec!["IADD".into(), "0.70".into()], vec!["B".into(), "1".into()]],
        );
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("class"));
    }
}
