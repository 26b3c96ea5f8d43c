//! The architecture-level error model: manifestation taxonomy, rate tables,
//! deterministic randomness, and corruption application.

mod corrupt;
mod manifestation;
mod rate_table;
mod rng;

pub use corrupt::{
    apply_manifestation, sample_manifestation, CorruptError, CorruptedCell, CorruptionDescriptor,
    InjectionPoint,
};
pub use manifestation::{BitType, ManifestationKind, ALL_MANIFESTATIONS};
pub use rate_table::{parse_rate_table, RateTable, RateTableError, Units, ROW_SUM_TOLERANCE};
pub use rng::{derive_seed, RngStream};
