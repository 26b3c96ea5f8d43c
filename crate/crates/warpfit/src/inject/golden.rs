//! Fault-free reference execution: captures the outputs a campaign compares
//! against and derives the hang budget.

use crate::isa::{execute, ExecConfig, ExecError, Program, RunResult, RunStatus};
use crate::profile::{classify, InstructionClass, ALL_CLASSES};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default hang budget multiplier: a run taking more than this times the
/// fault-free dynamic instruction count is declared a hang.
pub const DEFAULT_HANG_MULTIPLIER: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenReference {
    pub exit_code: u32,
    pub output: Vec<u32>,
    pub stdout: String,
    pub dynamic_count: u64,
    pub hang_budget: u64,
    pub class_counts: Vec<(InstructionClass, u64)>,
    /// Per-kernel per-class dynamic counts, in kernel execution order.
    pub kernel_class_counts: Vec<(String, Vec<(InstructionClass, u64)>)>,
}

#[derive(Debug, Error)]
pub enum GoldenError {
    #[error("golden run did not exit: {status:?}")]
    DidNotExit { status: RunStatus },
    #[error(transparent)]
    Exec(#[from] ExecError),
}

pub fn golden_run(program: &Program) -> Result<GoldenReference, GoldenError> {
    golden_run_with(program, &ExecConfig::default(), DEFAULT_HANG_MULTIPLIER)
}

pub fn golden_run_with(
    program: &Program,
    cfg: &ExecConfig,
    hang_multiplier: u64,
) -> Result<GoldenReference, GoldenError> {
    let result = execute(program, cfg)?;
    let RunStatus::Exited(exit_code) = result.status else {
        return Err(GoldenError::DidNotExit { status: result.status });
    };
    Ok(golden_from_run(&result, exit_code, hang_multiplier))
}

fn golden_from_run(result: &RunResult, exit_code: u32, hang_multiplier: u64) -> GoldenReference {
    let mut class_counts = [0u64; ALL_CLASSES.len()];
    for (op, n) in &result.opcode_counts {
        class_counts[classify(*op).ordinal() as usize] += n;
    }
    let kernel_class_counts = result
        .kernel_stats
        .iter()
        .map(|ks| {
            let mut per_class = [0u64; ALL_CLASSES.len()];
            for (op, n) in &ks.opcode_counts {
                per_class[classify(*op).ordinal() as usize] += n;
            }
            (
                ks.name.clone(),
                ALL_CLASSES
                    .iter()
                    .map(|&c| (c, per_class[c.ordinal() as usize]))
                    .filter(|(_, n)| *n > 0)
                    .collect(),
            )
        })
        .collect();
    GoldenReference {
        exit_code,
        output: result.output.clone(),
        stdout: result.stdout.clone(),
        dynamic_count: result.dynamic_count,
        hang_budget: hang_multiplier * result.dynamic_count,
        class_counts: ALL_CLASSES
            .iter()
            .map(|&c| (c, class_counts[c.ordinal() as usize]))
            .filter(|(_, n)| *n > 0)
            .collect(),
        kernel_class_counts,
    }
}

impl GoldenReference {
    pub fn class_count(&self, class: InstructionClass) -> u64 {
        self.class_counts.iter().find(|(c, _)| *c == class).map(|(_, n)| *n).unwrap_or(0)
    }
}
