//! Layout manifests: the register map a microbenchmark publishes so that
//! recorded dumps can be categorized and traced back to the originating
//! series step.

use crate::profile::InstructionClass;
use serde::{Deserialize, Serialize};

/// One step of the measured series: which register holds its output, which
/// earlier steps feed it, and the fault-free value (thread-uniform).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesStep {
    /// 1-based step index in dataflow order.
    pub index: u32,
    pub register: u8,
    /// Indices of series steps this step reads; empty for loads and seeds.
    pub depends_on: Vec<u32>,
    /// Expected register value on a fault-free run (identical across
    /// threads; the generated benchmarks are divergence-free).
    pub expected: u32,
    /// Static instruction locations whose corruption this step observes.
    /// One pc for arithmetic chains and loads; the packing groups list the
    /// compares plus the pack instruction.
    #[serde(default)]
    pub pcs: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccumulatorLayout {
    pub register: u8,
    pub expected: u32,
}

/// One hop of the branch-chain benchmark: the chain branch and the filler
/// branch (which jumps to the record routine) directly after it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchHop {
    pub chain_pc: u32,
    pub filler_pc: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutManifest {
    pub kernel: String,
    pub target: InstructionClass,
    pub steps: Vec<SeriesStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accumulator: Option<AccumulatorLayout>,
    /// Registers compared by CHK at the end of each iteration.
    pub checked_registers: Vec<u8>,
    /// Loop-counter register, when the benchmark logs early termination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_counter: Option<u8>,
    /// Branch-chain hops, for the control-flow benchmark.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub branch_hops: Vec<BranchHop>,
    pub iterations: u32,
    /// Known observation limits, e.g. origin aliasing between a packing
    /// instruction and the compares feeding it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl LayoutManifest {
    pub fn step(&self, index: u32) -> Option<&SeriesStep> {
        self.steps.iter().find(|s| s.index == index)
    }

    pub fn step_for_register(&self, register: u8) -> Option<&SeriesStep> {
        self.steps.iter().find(|s| s.register == register)
    }
}
