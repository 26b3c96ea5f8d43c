//! Exhaustive single-bit oracle: enumerate every (dynamic instruction,
//! destination bit, thread) of a class exactly once and report the exact
//! outcome distribution. Independent of the statistical site-selection path;
//! used to validate sampled campaigns on small programs.

use super::golden::GoldenReference;
use super::run::run_with_corruption;
use crate::classify::{classify_outcome, OutcomeClass, SymptomMatcher};
use crate::isa::{execute_with_hook, Dest, ExecConfig, ExecError, Program};
use crate::model::ManifestationKind;
use crate::profile::{classify, InstructionClass};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ORACLE_CAP: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleDistribution {
    pub class: InstructionClass,
    pub manifestation: ManifestationKind,
    pub runs: u64,
    pub masked: u64,
    pub sdc: u64,
    pub arch_due: u64,
    pub potential_arch_due: u64,
    pub p_sdc: f64,
    pub p_masked: f64,
    pub p_due: f64,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle supports single-bit flips only, got {0}")]
    UnsupportedManifestation(ManifestationKind),
    #[error("enumeration of {planned} runs exceeds the cap of {cap}")]
    CapExceeded { planned: u64, cap: u64 },
    #[error("class {class} has no dynamic instructions")]
    ClassAbsent { class: InstructionClass },
    #[error(transparent)]
    Exec(#[from] ExecError),
}

struct SitePoint {
    kernel_index: u32,
    /// Dynamic index within the class and kernel, in scheduler order.
    index: u64,
    write_mask: u64,
    dest: Dest,
}

pub fn exhaustive_oracle(
    program: &Program,
    class: InstructionClass,
    manifestation: ManifestationKind,
    golden: &GoldenReference,
    symptoms: &SymptomMatcher,
    cap: u64,
) -> Result<OracleDistribution, OracleError> {
    if manifestation != ManifestationKind::SingleBit {
        return Err(OracleError::UnsupportedManifestation(manifestation));
    }

    // Enumeration pass: every destination write of the class.
    let mut points: Vec<SitePoint> = Vec::new();
    let mut per_kernel_seen: Vec<u64> = vec![0; program.kernels.len()];
    execute_with_hook(program, &ExecConfig::with_budget(golden.hang_budget), |_, ev| {
        if classify(ev.opcode) != class {
            return;
        }
        let k = ev.kernel_index as usize;
        points.push(SitePoint {
            kernel_index: ev.kernel_index,
            index: per_kernel_seen[k],
            write_mask: ev.write_mask,
            dest: ev.dest,
        });
        per_kernel_seen[k] += 1;
    })?;
    if points.is_empty() {
        return Err(OracleError::ClassAbsent { class });
    }

    let planned: u64 = points
        .iter()
        .map(|p| p.write_mask.count_ones() as u64 * dest_bits(p.dest))
        .sum();
    if planned > cap {
        return Err(OracleError::CapExceeded { planned, cap });
    }

    let mut masked = 0u64;
    let mut sdc = 0u64;
    let mut arch_due = 0u64;
    let mut potential = 0u64;
    for point in &points {
        for thread in 0..64u32 {
            if point.write_mask >> thread & 1 == 0 {
                continue;
            }
            for bit in 0..dest_bits(point.dest) {
                let (result, applied) = run_with_corruption(
                    program,
                    golden.hang_budget,
                    Some(point.kernel_index),
                    class,
                    point.index,
                    |state, p| {
                        match p.dest {
                            Dest::Gpr(reg) => state.xor_reg(p.warp, thread, reg, 1 << bit),
                            Dest::Pred(pr) => {
                                let v = state.pred(p.warp, thread, pr);
                                state.set_pred(p.warp, thread, pr, !v);
                            }
                        }
                    },
                )?;
                debug_assert!(applied.is_some(), "enumerated site must be reachable");
                match classify_outcome(&result, golden, symptoms) {
                    OutcomeClass::Masked => masked += 1,
                    OutcomeClass::Sdc => sdc += 1,
                    OutcomeClass::ArchDue => arch_due += 1,
                    OutcomeClass::PotentialArchDue => potential += 1,
                }
            }
        }
    }
    let runs = masked + sdc + arch_due + potential;
    Ok(OracleDistribution {
        class,
        manifestation,
        runs,
        masked,
        sdc,
        arch_due,
        potential_arch_due: potential,
        p_sdc: sdc as f64 / runs as f64,
        p_masked: masked as f64 / runs as f64,
        p_due: (arch_due + potential) as f64 / runs as f64,
    })
}

fn dest_bits(dest: Dest) -> u64 {
    match dest {
        Dest::Gpr(_) => 32,
        Dest::Pred(_) => 1,
    }
}
