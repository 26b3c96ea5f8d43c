//! Detection validation: inject every modeled corruption into a generated
//! benchmark and confirm it is caught, categorized, and traced to the right
//! series step. Blind spots are reported as data, not failures.

use super::gen::{BenchError, Microbench};
use super::layout::SeriesStep;
use crate::classify::{
    categorize_event, classify_outcome, trace_origin, EventCategory, OriginRef, OutcomeClass,
    Phase, SymptomMatcher,
};
use crate::inject::{golden_run, run_with_corruption, GoldenReference};
use crate::isa::{execute_with_hook, Dest, ExecConfig, RunStatus};
use crate::model::{apply_manifestation, InjectionPoint, ManifestationKind, RngStream};
use crate::profile::{classify, InstructionClass};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetectionDepth {
    /// One probe per (step, manifestation kind) at the first dynamic
    /// instance.
    Quick,
    /// Every (dynamic instance, thread, bit) single-bit flip over all series
    /// destinations.
    ExhaustiveSingleBit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionCase {
    pub step: u32,
    pub probe: String,
    pub detected: bool,
    /// Category check result; absent when no dump was produced (a fault can
    /// preempt the dump) or the probe has no category expectation.
    pub category_ok: Option<bool>,
    pub origin_ok: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub target: InstructionClass,
    pub total: u64,
    pub detected: u64,
    pub detection_rate: f64,
    pub category_checked: u64,
    pub category_ok: u64,
    pub origin_checked: u64,
    pub origin_ok: u64,
    pub blind_spots: Vec<String>,
    pub notes: Vec<String>,
    pub cases: Vec<DetectionCase>,
}

struct ClassInstance {
    class_index: u64,
    pc: u32,
    write_mask: u64,
    dest: Dest,
}

pub fn validate_detection(
    bench: &Microbench,
    depth: DetectionDepth,
) -> Result<DetectionReport, BenchError> {
    if bench.layout.target == InstructionClass::Bra {
        return validate_branch_chain(bench);
    }
    let golden = golden_run(&bench.program)
        .map_err(|e| BenchError::SelfCheck(format!("golden run failed: {e}")))?;
    let symptoms = SymptomMatcher::default();
    let instances = enumerate_class(bench, &golden)?;

    let mut cases: Vec<DetectionCase> = Vec::new();
    for step in &bench.layout.steps {
        let step_instances: Vec<&ClassInstance> =
            instances.iter().filter(|i| step.pcs.contains(&i.pc)).collect();
        match depth {
            DetectionDepth::ExhaustiveSingleBit => {
                for inst in &step_instances {
                    for thread in 0..64u32 {
                        if inst.write_mask >> thread & 1 == 0 {
                            continue;
                        }
                        let bits = match inst.dest {
                            Dest::Gpr(_) => 32,
                            Dest::Pred(_) => 1,
                        };
                        for bit in 0..bits {
                            cases.push(run_forced_flip(
                                bench, &golden, &symptoms, step, inst, thread, bit,
                            )?);
                        }
                    }
                }
            }
            DetectionDepth::Quick => {
                let Some(inst) = step_instances.first() else { continue };
                let kinds: &[ManifestationKind] = match inst.dest {
                    Dest::Gpr(_) => &[
                        ManifestationKind::SingleBit,
                        ManifestationKind::DoubleBit,
                        ManifestationKind::RandomValue,
                    ],
                    // A predicate destination is one bit; every flip model
                    // degenerates to a toggle.
                    Dest::Pred(_) => &[ManifestationKind::SingleBit],
                };
                for (k, kind) in kinds.iter().enumerate() {
                    cases.push(run_seeded_probe(
                        bench,
                        &golden,
                        &symptoms,
                        step,
                        inst,
                        *kind,
                        0x5eed_0000 + (step.index as u64) * 16 + k as u64,
                    )?);
                }
            }
        }
    }
    Ok(summarize(bench, cases))
}

fn enumerate_class(
    bench: &Microbench,
    golden: &GoldenReference,
) -> Result<Vec<ClassInstance>, BenchError> {
    let target = bench.layout.target;
    let mut instances = Vec::new();
    let mut seen = 0u64;
    execute_with_hook(&bench.program, &ExecConfig::with_budget(golden.hang_budget), |_, ev| {
        if classify(ev.opcode) != target {
            return;
        }
        instances.push(ClassInstance {
            class_index: seen,
            pc: ev.pc as u32,
            write_mask: ev.write_mask,
            dest: ev.dest,
        });
        seen += 1;
    })?;
    Ok(instances)
}

fn run_forced_flip(
    bench: &Microbench,
    golden: &GoldenReference,
    symptoms: &SymptomMatcher,
    step: &SeriesStep,
    inst: &ClassInstance,
    thread: u32,
    bit: u32,
) -> Result<DetectionCase, BenchError> {
    let (result, applied) = run_with_corruption(
        &bench.program,
        golden.hang_budget,
        Some(0),
        bench.layout.target,
        inst.class_index,
        |state, point| match point.dest {
            Dest::Gpr(reg) => state.xor_reg(point.warp, thread, reg, 1 << bit),
            Dest::Pred(p) => {
                let v = state.pred(point.warp, thread, p);
                state.set_pred(point.warp, thread, p, !v);
            }
        },
    )?;
    debug_assert!(applied.is_some());
    let probe = format!("single_bit(instance={}, thread={thread}, bit={bit})", inst.class_index);
    Ok(evaluate(bench, golden, symptoms, step, probe, Some(1), &result))
}

fn run_seeded_probe(
    bench: &Microbench,
    golden: &GoldenReference,
    symptoms: &SymptomMatcher,
    step: &SeriesStep,
    inst: &ClassInstance,
    kind: ManifestationKind,
    seed: u64,
) -> Result<DetectionCase, BenchError> {
    let mut dest_rng = RngStream::new(seed);
    let mut value_rng = RngStream::new(seed ^ 0xABCD_EF01);
    let (result, applied) = run_with_corruption(
        &bench.program,
        golden.hang_budget,
        Some(0),
        bench.layout.target,
        inst.class_index,
        |state, point: &InjectionPoint| {
            apply_manifestation(state, point, kind, &mut dest_rng, &mut value_rng)
        },
    )?;
    let descriptor = match applied {
        Some(Ok(d)) => d,
        Some(Err(e)) => return Err(BenchError::SelfCheck(format!("apply failed: {e}"))),
        None => return Err(BenchError::SelfCheck("probe site unreachable".into())),
    };
    // The category expectation follows the actual corruption weight: a
    // random replacement that happens to land one bit away is a single-bit
    // event to the observer.
    let hamming = descriptor.cells.first().map(|c| (c.before ^ c.after).count_ones());
    let probe = format!("{kind}(instance={})", inst.class_index);
    Ok(evaluate(bench, golden, symptoms, step, probe, hamming, &result))
}

fn evaluate(
    bench: &Microbench,
    golden: &GoldenReference,
    symptoms: &SymptomMatcher,
    step: &SeriesStep,
    probe: String,
    injected_hamming: Option<u32>,
    result: &crate::isa::RunResult,
) -> DetectionCase {
    let records = &result.records;
    let classification = classify_outcome(result, golden, symptoms);
    let due = matches!(classification, OutcomeClass::ArchDue | OutcomeClass::PotentialArchDue);
    let detected = !records.is_empty() || due;

    let mut note = None;
    let category_ok = match (records.is_empty(), injected_hamming) {
        (false, Some(h)) => {
            let expected = match h {
                0 => None, // corruption changed nothing
                1 => Some(EventCategory::SingleBitOneThread),
                2 => Some(EventCategory::DoubleBitOneThread),
                _ => Some(EventCategory::RandomValueOneThread),
            };
            expected.map(|want| {
                match categorize_event(Phase::DuringKernel, &result.status, records, &bench.layout)
                {
                    Ok(ev) => ev.category == want,
                    Err(e) => {
                        note = Some(format!("categorize failed: {e}"));
                        false
                    }
                }
            })
        }
        _ => None,
    };
    let origin_ok = if records.is_empty() {
        None
    } else {
        match trace_origin(&records[0], &bench.layout) {
            Ok(trace) => Some(trace.origin == OriginRef::Step(step.index) && !trace.multi_origin),
            Err(e) => {
                note = Some(format!("trace failed: {e}"));
                Some(false)
            }
        }
    };
    DetectionCase { step: step.index, probe, detected, category_ok, origin_ok, note }
}

/// Branch-chain validation: retarget every chain branch to (a) its filler,
/// expecting early termination with the loop index logged, and (b) an
/// address outside the kernel, expecting an illegal-instruction fault.
fn validate_branch_chain(bench: &Microbench) -> Result<DetectionReport, BenchError> {
    let golden = golden_run(&bench.program)
        .map_err(|e| BenchError::SelfCheck(format!("golden run failed: {e}")))?;
    let symptoms = SymptomMatcher::default();
    let kernel_len = bench.program.kernels[0].instructions.len();
    let counter = bench.layout.loop_counter.expect("branch chain has a loop counter");

    let mut cases = Vec::new();
    for (h, hop) in bench.layout.branch_hops.iter().enumerate() {
        // (a) control transfer to a filler: record routine, early exit.
        let to_filler =
            bench.program.retarget_branch(0, hop.chain_pc as usize, hop.filler_pc as usize);
        let result = crate::isa::execute(&to_filler, &ExecConfig::with_budget(golden.hang_budget))?;
        let logged_first_iteration = result
            .records
            .first()
            .map(|r| r.regs[0][counter as usize] == 0)
            .unwrap_or(false);
        let detected = result.status == RunStatus::Exited(1)
            && !result.records.is_empty()
            && result.stdout.contains("RECORD:");
        cases.push(DetectionCase {
            step: h as u32 + 1,
            probe: format!("retarget(pc={}, to=filler)", hop.chain_pc),
            detected,
            category_ok: None,
            origin_ok: None,
            note: Some(if logged_first_iteration {
                "early termination, loop index 0 logged".into()
            } else {
                "early termination without a clean loop-index log".into()
            }),
        });

        // (b) control transfer outside the program: a crash.
        let outside = bench.program.retarget_branch(0, hop.chain_pc as usize, kernel_len + 7);
        let result = crate::isa::execute(&outside, &ExecConfig::with_budget(golden.hang_budget))?;
        let classification = classify_outcome(&result, &golden, &symptoms);
        cases.push(DetectionCase {
            step: h as u32 + 1,
            probe: format!("retarget(pc={}, to=out_of_kernel)", hop.chain_pc),
            detected: classification == OutcomeClass::ArchDue
                && result.status == RunStatus::Fault(crate::isa::FaultKind::IllegalInstruction),
            category_ok: None,
            origin_ok: None,
            note: None,
        });
    }
    Ok(summarize(bench, cases))
}

fn summarize(bench: &Microbench, cases: Vec<DetectionCase>) -> DetectionReport {
    let total = cases.len() as u64;
    let detected = cases.iter().filter(|c| c.detected).count() as u64;
    let category_checked = cases.iter().filter(|c| c.category_ok.is_some()).count() as u64;
    let category_ok = cases.iter().filter(|c| c.category_ok == Some(true)).count() as u64;
    let origin_checked = cases.iter().filter(|c| c.origin_ok.is_some()).count() as u64;
    let origin_ok = cases.iter().filter(|c| c.origin_ok == Some(true)).count() as u64;
    let blind_spots = cases
        .iter()
        .filter(|c| !c.detected)
        .map(|c| format!("step {}: {} undetected", c.step, c.probe))
        .collect();
    DetectionReport {
        target: bench.layout.target,
        total,
        detected,
        detection_rate: if total == 0 { 0.0 } else { detected as f64 / total as f64 },
        category_checked,
        category_ok,
        origin_checked,
        origin_ok,
        blind_spots,
        notes: bench.layout.notes.clone(),
        cases,
    }
}
