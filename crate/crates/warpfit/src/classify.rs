//! Two classifiers. `classify_outcome` buckets an injected run against its
//! golden reference (Masked / SDC / ArchDUE / PotentialArchDUE).
//! `categorize_event` pattern-matches a recorded register dump into the
//! eight corruption categories and attributes each to a low-level bit type;
//! `trace_origin` walks the dump back to the series step that first
//! deviated.

use crate::inject::GoldenReference;
use crate::isa::{FaultKind, RecordEntry, RunResult, RunStatus};
use crate::microbench::{LayoutManifest, SeriesStep};
use crate::model::BitType;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// Outcome of one injected run, in precedence order (a run that both hangs
/// and would have diffed output is an ArchDUE).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeClass {
    Masked,
    Sdc,
    ArchDue,
    PotentialArchDue,
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeClass::Masked => "masked",
            OutcomeClass::Sdc => "sdc",
            OutcomeClass::ArchDue => "arch_due",
            OutcomeClass::PotentialArchDue => "potential_arch_due",
        })
    }
}

/// Substring patterns that count as failure symptoms on the stdout analog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymptomMatcher {
    pub patterns: Vec<String>,
}

impl Default for SymptomMatcher {
    fn default() -> Self {
        SymptomMatcher { patterns: vec!["CHK mismatch".into(), "RECORD:".into()] }
    }
}

impl SymptomMatcher {
    pub fn matches(&self, stdout: &str) -> bool {
        self.patterns.iter().any(|p| stdout.contains(p.as_str()))
    }
}

/// Total classification: crashes, hangs and exit-status changes are ArchDUE;
/// symptom text with the golden exit status is a PotentialArchDUE; output or
/// stdout differences with a clean exit are SDC; anything else is Masked.
pub fn classify_outcome(
    run: &RunResult,
    golden: &GoldenReference,
    symptoms: &SymptomMatcher,
) -> OutcomeClass {
    match run.status {
        RunStatus::Hang | RunStatus::Fault(_) => return OutcomeClass::ArchDue,
        RunStatus::Exited(code) if code != golden.exit_code => return OutcomeClass::ArchDue,
        RunStatus::Exited(_) => {}
    }
    if symptoms.matches(&run.stdout) && !symptoms.matches(&golden.stdout) {
        return OutcomeClass::PotentialArchDue;
    }
    if run.output != golden.output || run.stdout != golden.stdout {
        return OutcomeClass::Sdc;
    }
    OutcomeClass::Masked
}

/// When in the run a failure was observed, relative to kernel execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    BeforeKernel,
    DuringKernel,
    AfterKernel,
}

/// The corruption categories observable in a microbenchmark dump, plus the
/// failure modes that preempt a dump.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventCategory {
    /// 1: single bit flip, one instruction, one thread.
    SingleBitOneThread,
    /// 2: double bit flip, one instruction, one thread.
    DoubleBitOneThread,
    /// 3: random value, one instruction, one thread.
    RandomValueOneThread,
    /// 4: random value, same instruction, two threads.
    RandomValueTwoThreads,
    /// 5: double bit flips, same instruction, all threads of one warp.
    WarpWideDoubleBit,
    /// 6: random value, same instruction, all threads of one warp.
    WarpWideRandomValue,
    /// 7: zero value, same instruction, all threads of one warp.
    WarpWideZero,
    /// 8: random values, two instructions, all threads of two warps.
    TwoWarpRandomValue,
    CrashBeforeKernel,
    CrashDuringKernel(FaultKind),
    HangDuringKernel,
    /// Record triggered but every observed value matches: the checking or
    /// loop control was perturbed, not the measured instructions.
    Ignored,
}

impl EventCategory {
    pub fn label(&self) -> String {
        match self {
            EventCategory::SingleBitOneThread => "1_single_bit_one_thread".into(),
            EventCategory::DoubleBitOneThread => "2_double_bit_one_thread".into(),
            EventCategory::RandomValueOneThread => "3_random_value_one_thread".into(),
            EventCategory::RandomValueTwoThreads => "4_random_value_two_threads".into(),
            EventCategory::WarpWideDoubleBit => "5_warp_wide_double_bit".into(),
            EventCategory::WarpWideRandomValue => "6_warp_wide_random_value".into(),
            EventCategory::WarpWideZero => "7_warp_wide_zero".into(),
            EventCategory::TwoWarpRandomValue => "8_two_warp_random_value".into(),
            EventCategory::CrashBeforeKernel => "crash_before_kernel".into(),
            EventCategory::CrashDuringKernel(kind) => format!("crash_during_kernel_{kind:?}"),
            EventCategory::HangDuringKernel => "hang_during_kernel".into(),
            EventCategory::Ignored => "ignored".into(),
        }
    }
}

/// Table-driven attribution. Categories 1-4 corrupt one or two threads of
/// one instruction: pipeline state, F-bits. Categories 5-8 corrupt whole
/// warps the same way: instruction-path state, IS-bits. Failures before the
/// kernel point at machine-scoped state (IM); illegal instructions at the
/// fetch path (IS); address and stack damage at pipeline state (F). Hangs
/// during a kernel give no visibility, so they stay unattributed.
pub fn attribution(category: EventCategory) -> BitType {
    use EventCategory::*;
    match category {
        SingleBitOneThread | DoubleBitOneThread | RandomValueOneThread | RandomValueTwoThreads => {
            BitType::F
        }
        WarpWideDoubleBit | WarpWideRandomValue | WarpWideZero | TwoWarpRandomValue => BitType::Is,
        CrashBeforeKernel => BitType::Im,
        CrashDuringKernel(FaultKind::IllegalInstruction) => BitType::Is,
        CrashDuringKernel(FaultKind::OutOfRangeAddress) => BitType::F,
        CrashDuringKernel(FaultKind::StackError) => BitType::F,
        HangDuringKernel | Ignored => BitType::Unattributed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorizedEvent {
    pub category: EventCategory,
    pub bit_type: BitType,
}

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("malformed dump: {0}")]
    MalformedDump(String),
    #[error("deviation pattern outside the category taxonomy: {0}")]
    Unrecognized(String),
}

/// Per-warp deviation summary extracted from a record entry.
struct WarpDeviations {
    warp: u32,
    /// (step index, deviating threads, per-thread hamming distance, all-zero)
    per_step: Vec<StepDeviation>,
}

struct StepDeviation {
    step: u32,
    threads: Vec<u32>,
    hammings: Vec<u32>,
    all_zero: bool,
}

fn scan_entry(entry: &RecordEntry, layout: &LayoutManifest) -> Result<WarpDeviations, EventError> {
    let mut per_step = Vec::new();
    for step in &layout.steps {
        let mut threads = Vec::new();
        let mut hammings = Vec::new();
        let mut all_zero = true;
        for (t, regs) in entry.regs.iter().enumerate() {
            let got = *regs.get(step.register as usize).ok_or_else(|| {
                EventError::MalformedDump(format!(
                    "dump lacks register R{} for thread {t}",
                    step.register
                ))
            })?;
            if got != step.expected {
                threads.push(t as u32);
                hammings.push((got ^ step.expected).count_ones());
                if got != 0 {
                    all_zero = false;
                }
            }
        }
        if !threads.is_empty() {
            per_step.push(StepDeviation { step: step.index, threads, hammings, all_zero });
        }
    }
    Ok(WarpDeviations { warp: entry.warp, per_step })
}

/// Deviating steps whose inputs were all clean: the candidate origins.
fn origin_steps(dev: &WarpDeviations, layout: &LayoutManifest) -> Vec<u32> {
    let deviating: BTreeSet<u32> = dev.per_step.iter().map(|d| d.step).collect();
    dev.per_step
        .iter()
        .filter(|d| {
            let step = layout.step(d.step).expect("scanned step exists in layout");
            !step.depends_on.iter().any(|dep| deviating.contains(dep))
        })
        .map(|d| d.step)
        .collect()
}

/// Categorize a recorded event. `phase` and `status` preempt dump analysis
/// for crashes and hangs; otherwise the dump's deviation pattern against the
/// layout's expected values decides the category.
pub fn categorize_event(
    phase: Phase,
    status: &RunStatus,
    records: &[RecordEntry],
    layout: &LayoutManifest,
) -> Result<CategorizedEvent, EventError> {
    if phase == Phase::BeforeKernel {
        let category = EventCategory::CrashBeforeKernel;
        return Ok(CategorizedEvent { category, bit_type: attribution(category) });
    }
    match status {
        RunStatus::Hang => {
            let category = EventCategory::HangDuringKernel;
            return Ok(CategorizedEvent { category, bit_type: attribution(category) });
        }
        RunStatus::Fault(kind) => {
            let category = EventCategory::CrashDuringKernel(*kind);
            return Ok(CategorizedEvent { category, bit_type: attribution(category) });
        }
        RunStatus::Exited(_) => {}
    }

    // Completed run: inspect dumps for deviations at the origin steps. Only
    // the first dump per warp counts; it holds the values at detection time.
    let mut warps: Vec<WarpDeviations> = Vec::new();
    let mut seen: BTreeSet<u32> = BTreeSet::new();
    for entry in records {
        if !seen.insert(entry.warp) {
            continue;
        }
        let dev = scan_entry(entry, layout)?;
        if !dev.per_step.is_empty() {
            warps.push(dev);
        }
    }
    if warps.is_empty() {
        let category = EventCategory::Ignored;
        return Ok(CategorizedEvent { category, bit_type: attribution(category) });
    }

    if warps.len() == 2 {
        // Two warps, each with its own origin instruction, all threads
        // touched: category 8.
        let all_wide = warps.iter().all(|w| {
            origin_steps(w, layout)
                .iter()
                .any(|s| w.per_step.iter().any(|d| d.step == *s && d.threads.len() >= 2))
        });
        if all_wide {
            let category = EventCategory::TwoWarpRandomValue;
            return Ok(CategorizedEvent { category, bit_type: attribution(category) });
        }
        return Err(EventError::Unrecognized("two warps deviate without warp-wide origins".into()));
    }
    if warps.len() > 2 {
        return Err(EventError::Unrecognized(format!("{} warps deviate", warps.len())));
    }

    let warp = &warps[0];
    let origins = origin_steps(warp, layout);
    if origins.len() != 1 {
        return Err(EventError::Unrecognized(format!(
            "warp {} has {} origin candidates",
            warp.warp,
            origins.len()
        )));
    }
    let origin = warp.per_step.iter().find(|d| d.step == origins[0]).unwrap();
    let active_threads = records
        .iter()
        .find(|e| e.warp == warp.warp)
        .map(|e| e.active_mask.count_ones())
        .unwrap_or(0);

    let category = match origin.threads.len() {
        1 => match origin.hammings[0] {
            1 => EventCategory::SingleBitOneThread,
            2 => EventCategory::DoubleBitOneThread,
            _ => EventCategory::RandomValueOneThread,
        },
        2 if active_threads > 2 => EventCategory::RandomValueTwoThreads,
        n if n as u32 >= active_threads.max(2) => {
            if origin.all_zero {
                EventCategory::WarpWideZero
            } else if origin.hammings.iter().all(|&h| h == 2) {
                EventCategory::WarpWideDoubleBit
            } else {
                EventCategory::WarpWideRandomValue
            }
        }
        n => {
            return Err(EventError::Unrecognized(format!(
                "origin step {} deviates in {n} of {active_threads} threads",
                origin.step
            )))
        }
    };
    Ok(CategorizedEvent { category, bit_type: attribution(category) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OriginRef {
    Step(u32),
    Accumulator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginTrace {
    pub origin: OriginRef,
    /// Steps downstream of the origin that also deviate, in dataflow order.
    pub propagated: Vec<OriginRef>,
    /// Set when the deviations are not explainable by a single origin.
    pub multi_origin: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("malformed dump: {0}")]
    MalformedDump(String),
    #[error("no deviations in dump")]
    NoDeviations,
}

/// Walk one warp's dump in dataflow order: the origin is the first series
/// register deviating from its expected value; every later deviating step
/// with a deviating dependency is propagation. A deviating step whose inputs
/// were all clean (other than the origin itself) flags multi-origin.
pub fn trace_origin(entry: &RecordEntry, layout: &LayoutManifest) -> Result<OriginTrace, TraceError> {
    let deviating_step = |step: &SeriesStep| -> Result<bool, TraceError> {
        for (t, regs) in entry.regs.iter().enumerate() {
            let got = *regs.get(step.register as usize).ok_or_else(|| {
                TraceError::MalformedDump(format!(
                    "dump lacks register R{} for thread {t}",
                    step.register
                ))
            })?;
            if got != step.expected {
                return Ok(true);
            }
        }
        Ok(false)
    };

    let mut deviating: BTreeSet<u32> = BTreeSet::new();
    for step in &layout.steps {
        if deviating_step(step)? {
            deviating.insert(step.index);
        }
    }

    let acc_deviates = match &layout.accumulator {
        Some(acc) => entry.regs.iter().any(|regs| {
            regs.get(acc.register as usize).copied().unwrap_or(acc.expected) != acc.expected
        }),
        None => false,
    };

    let Some(&first) = deviating.iter().next() else {
        if acc_deviates {
            return Ok(OriginTrace {
                origin: OriginRef::Accumulator,
                propagated: Vec::new(),
                multi_origin: false,
            });
        }
        return Err(TraceError::NoDeviations);
    };

    let mut propagated = Vec::new();
    let mut multi_origin = false;
    for step in &layout.steps {
        if step.index == first || !deviating.contains(&step.index) {
            continue;
        }
        if step.depends_on.iter().any(|dep| deviating.contains(dep)) {
            propagated.push(OriginRef::Step(step.index));
        } else {
            multi_origin = true;
        }
    }
    if acc_deviates {
        propagated.push(OriginRef::Accumulator);
    }
    Ok(OriginTrace { origin: OriginRef::Step(first), propagated, multi_origin })
}
