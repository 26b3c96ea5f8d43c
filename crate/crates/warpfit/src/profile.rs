//! Fault-free dynamic profiling: per-opcode and per-class instruction
//! distributions, coverage of the seven modeled classes, and an issue-rate
//! analog computed from the interpreter's round-robin scheduler.

use crate::isa::{execute, ExecConfig, ExecError, Opcode, Program, RunResult, RunStatus};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// The seven modeled instruction groups plus a bucket for everything else.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InstructionClass {
    #[serde(rename = "IADD")]
    Iadd,
    #[serde(rename = "FADD")]
    Fadd,
    #[serde(rename = "IMAD")]
    Imad,
    #[serde(rename = "FFMA")]
    Ffma,
    #[serde(rename = "LDS")]
    Lds,
    #[serde(rename = "ISETP")]
    Isetp,
    #[serde(rename = "BRA")]
    Bra,
    #[serde(rename = "UNCOVERED")]
    Uncovered,
}

pub const MODELED_CLASSES: [InstructionClass; 7] = [
    InstructionClass::Iadd,
    InstructionClass::Fadd,
    InstructionClass::Imad,
    InstructionClass::Ffma,
    InstructionClass::Lds,
    InstructionClass::Isetp,
    InstructionClass::Bra,
];

pub const ALL_CLASSES: [InstructionClass; 8] = [
    InstructionClass::Iadd,
    InstructionClass::Fadd,
    InstructionClass::Imad,
    InstructionClass::Ffma,
    InstructionClass::Lds,
    InstructionClass::Isetp,
    InstructionClass::Bra,
    InstructionClass::Uncovered,
];

impl InstructionClass {
    pub fn name(self) -> &'static str {
        match self {
            InstructionClass::Iadd => "IADD",
            InstructionClass::Fadd => "FADD",
            InstructionClass::Imad => "IMAD",
            InstructionClass::Ffma => "FFMA",
            InstructionClass::Lds => "LDS",
            InstructionClass::Isetp => "ISETP",
            InstructionClass::Bra => "BRA",
            InstructionClass::Uncovered => "UNCOVERED",
        }
    }

    pub fn from_name(s: &str) -> Option<InstructionClass> {
        ALL_CLASSES.iter().copied().find(|c| c.name() == s)
    }

    /// Stable ordinal used for seed derivation.
    pub fn ordinal(self) -> u64 {
        ALL_CLASSES.iter().position(|&c| c == self).unwrap() as u64
    }
}

impl fmt::Display for InstructionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Total mapping from opcode mnemonic to instruction class. Instructions
/// that operate purely on registers group with the arithmetic class whose
/// pipeline they exercise: shifts, logic ops, min/max, and float-to-int
/// conversions join IADD; double-precision adds join FADD; multiplies and
/// fused ops join FFMA/IMAD; predicate machinery joins ISETP; control
/// transfers join BRA. Everything unmapped lands in UNCOVERED.
pub fn classify_opcode(mnemonic: &str) -> InstructionClass {
    match mnemonic.to_ascii_uppercase().as_str() {
        "IADD" | "ISUB" | "IMNMX" | "SHL" | "SHR" | "LOP" | "AND" | "OR" | "XOR" | "NOT"
        | "F2I" => InstructionClass::Iadd,
        "IMAD" | "IMUL" => InstructionClass::Imad,
        "FADD" | "DADD" => InstructionClass::Fadd,
        "FFMA" | "DFMA" | "FMUL" | "DMUL" => InstructionClass::Ffma,
        "LDS" => InstructionClass::Lds,
        "ISETP" | "FSETP" | "DSETP" | "PSETP" | "P2R" => InstructionClass::Isetp,
        "BRA" | "BRX" | "JMP" | "CAL" | "RET" => InstructionClass::Bra,
        _ => InstructionClass::Uncovered,
    }
}

pub fn classify(op: Opcode) -> InstructionClass {
    classify_opcode(op.mnemonic())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub class: InstructionClass,
    pub count: u64,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelProfile {
    pub name: String,
    pub invocations: u64,
    pub dynamic_count: u64,
    pub class_counts: Vec<(InstructionClass, u64)>,
}

/// Fault-free dynamic profile of a program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub total_instructions: u64,
    pub cycles: u64,
    /// Instructions issued per scheduler cycle, instruction-weighted across
    /// the whole run (one round-robin scheduler, at most `issue_slots`
    /// instructions per cycle, at most one per warp).
    pub issue_rate: f64,
    pub issue_rate_definition: String,
    pub opcode_counts: Vec<(Opcode, u64)>,
    /// All eight classes, in declaration order, fractions summing to 1.
    pub classes: Vec<ClassProfile>,
    pub covered_fraction: f64,
    pub kernels: Vec<KernelProfile>,
}

pub const ISSUE_RATE_DEFINITION: &str =
    "instruction-weighted: total issued instructions / scheduler cycles, round-robin, \
     at most one instruction per warp per cycle";

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("unprofilable program: fault-free run ended with {status:?}")]
    Unprofilable { status: RunStatus },
    #[error(transparent)]
    Exec(#[from] ExecError),
}

pub fn profile(program: &Program) -> Result<Profile, ProfileError> {
    profile_with(program, &ExecConfig::default())
}

pub fn profile_with(program: &Program, cfg: &ExecConfig) -> Result<Profile, ProfileError> {
    let result = execute(program, cfg)?;
    if !result.status.is_exited() {
        return Err(ProfileError::Unprofilable { status: result.status });
    }
    Ok(profile_from_run(&result))
}

/// Build a profile from an already-executed fault-free run.
pub fn profile_from_run(result: &RunResult) -> Profile {
    let total = result.dynamic_count;
    let mut class_counts = [0u64; ALL_CLASSES.len()];
    for (op, n) in &result.opcode_counts {
        class_counts[classify(*op).ordinal() as usize] += n;
    }
    let classes: Vec<ClassProfile> = ALL_CLASSES
        .iter()
        .map(|&class| ClassProfile {
            class,
            count: class_counts[class.ordinal() as usize],
            fraction: if total == 0 {
                0.0
            } else {
                class_counts[class.ordinal() as usize] as f64 / total as f64
            },
        })
        .collect();
    let covered_fraction = 1.0 - classes.last().unwrap().fraction;
    let kernels = result
        .kernel_stats
        .iter()
        .map(|ks| {
            let mut per_class = [0u64; ALL_CLASSES.len()];
            for (op, n) in &ks.opcode_counts {
                per_class[classify(*op).ordinal() as usize] += n;
            }
            KernelProfile {
                name: ks.name.clone(),
                invocations: 1,
                dynamic_count: ks.dynamic_count,
                class_counts: ALL_CLASSES
                    .iter()
                    .map(|&c| (c, per_class[c.ordinal() as usize]))
                    .filter(|(_, n)| *n > 0)
                    .collect(),
            }
        })
        .collect();
    Profile {
        total_instructions: total,
        cycles: result.cycles,
        issue_rate: if result.cycles == 0 { 0.0 } else { total as f64 / result.cycles as f64 },
        issue_rate_definition: ISSUE_RATE_DEFINITION.to_string(),
        opcode_counts: result.opcode_counts.clone(),
        classes,
        covered_fraction,
        kernels,
    }
}

impl Profile {
    pub fn class_count(&self, class: InstructionClass) -> u64 {
        self.classes.iter().find(|c| c.class == class).map(|c| c.count).unwrap_or(0)
    }

    pub fn class_fraction(&self, class: InstructionClass) -> f64 {
        self.classes.iter().find(|c| c.class == class).map(|c| c.fraction).unwrap_or(0.0)
    }

    /// Synthetic profile from class fractions, for composition studies where
    /// the instruction mix is given rather than measured.
    pub fn from_fractions(fractions: &[(InstructionClass, f64)], issue_rate: f64) -> Profile {
        let classes: Vec<ClassProfile> = ALL_CLASSES
            .iter()
            .map(|&class| {
                let fraction = fractions
                    .iter()
                    .find(|(c, _)| *c == class)
                    .map(|(_, f)| *f)
                    .unwrap_or(0.0);
                ClassProfile { class, count: 0, fraction }
            })
            .collect();
        let covered = 1.0 - classes.last().unwrap().fraction;
        Profile {
            total_instructions: 0,
            cycles: 0,
            issue_rate,
            issue_rate_definition: ISSUE_RATE_DEFINITION.to_string(),
            opcode_counts: Vec::new(),
            classes,
            covered_fraction: covered,
            kernels: Vec::new(),
        }
    }
}
