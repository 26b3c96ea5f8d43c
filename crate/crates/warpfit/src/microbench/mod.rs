//! Generators for the per-class microbenchmarks, their layout manifests, and
//! detection validation.

mod gen;
mod layout;
mod validate;

pub use gen::{
    generate, reference_accumulator, reference_series, BenchError, Microbench, MicrobenchSpec,
};
pub use layout::{AccumulatorLayout, BranchHop, LayoutManifest, SeriesStep};
pub use validate::{validate_detection, DetectionCase, DetectionDepth, DetectionReport};
