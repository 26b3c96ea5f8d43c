//! Executing a single injection: run to the site's dynamic instruction,
//! corrupt the freshly written destination, and carry the run to completion,
//! hang budget, or fault.

use super::golden::GoldenReference;
use super::site::InjectionSite;
use crate::classify::{classify_outcome, OutcomeClass, Phase, SymptomMatcher};
use crate::isa::{
    execute_with_hook, Dest, ExecConfig, ExecError, Program, RecordEntry, RunResult, RunStatus,
};
use crate::model::{
    apply_manifestation, CorruptError, CorruptionDescriptor, InjectionPoint, ManifestationKind,
    RngStream,
};
use crate::profile::{classify, InstructionClass};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffSample {
    pub index: u32,
    pub expected: u32,
    pub actual: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct OutputDiff {
    pub differing_words: u64,
    /// Up to the first eight differing words.
    pub samples: Vec<DiffSample>,
}

impl OutputDiff {
    fn between(golden: &[u32], actual: &[u32]) -> OutputDiff {
        let mut diff = OutputDiff::default();
        for (i, (g, a)) in golden.iter().zip(actual.iter()).enumerate() {
            if g != a {
                diff.differing_words += 1;
                if diff.samples.len() < 8 {
                    diff.samples.push(DiffSample { index: i as u32, expected: *g, actual: *a });
                }
            }
        }
        diff.differing_words += golden.len().abs_diff(actual.len()) as u64;
        diff
    }
}

/// Everything observed about one injected run; self-describing and
/// replayable from `site` alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub site: InjectionSite,
    pub descriptor: CorruptionDescriptor,
    pub phase: Phase,
    pub status: RunStatus,
    pub classification: OutcomeClass,
    pub output_diff: OutputDiff,
    pub stdout_differs: bool,
    pub records: Vec<RecordEntry>,
    pub dynamic_count: u64,
}

#[derive(Debug, Error)]
pub enum InjectError {
    #[error("site not reached: {kernel} has fewer than {wanted} dynamic {class} instructions")]
    SiteNotReached { kernel: String, class: InstructionClass, wanted: u64 },
    #[error("corruption failed: {0}")]
    Corrupt(#[from] CorruptError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Golden(#[from] super::golden::GoldenError),
    #[error("site selection failed: {0}")]
    Site(#[from] super::site::SiteError),
}

pub fn run_injection(
    program: &Program,
    site: &InjectionSite,
    golden: &GoldenReference,
    symptoms: &SymptomMatcher,
) -> Result<OutcomeRecord, InjectError> {
    let kernel_index = program.kernel_index(&site.kernel).map(|i| i as u32);
    let mut dest_rng = RngStream::new(site.dest_seed);
    let mut bit_rng = RngStream::new(site.bit_seed);
    let manifestation = site.manifestation;
    let site_class = site.class;
    let site_index = site.index_in_class;

    let (result, outcome) = run_with_corruption(
        program,
        golden.hang_budget,
        kernel_index,
        site_class,
        site_index,
        |state, point| apply_manifestation(state, point, manifestation, &mut dest_rng, &mut bit_rng),
    )?;

    let descriptor = match outcome {
        Some(Ok(d)) => d,
        Some(Err(e)) => return Err(InjectError::Corrupt(e)),
        None => {
            return Err(InjectError::SiteNotReached {
                kernel: site.kernel.clone(),
                class: site.class,
                wanted: site.index_in_class + 1,
            })
        }
    };

    let classification = classify_outcome(&result, golden, symptoms);
    Ok(OutcomeRecord {
        site: site.clone(),
        descriptor,
        phase: Phase::DuringKernel,
        status: result.status,
        classification,
        output_diff: OutputDiff::between(&golden.output, &result.output),
        stdout_differs: result.stdout != golden.stdout,
        records: result.records,
        dynamic_count: result.dynamic_count,
    })
}

/// Shared low-level runner: execute `program` under `budget`, and at the
/// `index`-th dynamic instruction of `class` within the selected kernel,
/// hand the machine state to `corrupt` right after the destination write.
/// Returns the run result and the corruption outcome (None if the site was
/// never reached).
pub fn run_with_corruption<F, T>(
    program: &Program,
    budget: u64,
    kernel_index: Option<u32>,
    class: InstructionClass,
    index: u64,
    corrupt: F,
) -> Result<(RunResult, Option<T>), ExecError>
where
    F: FnOnce(&mut crate::isa::MachineState, &InjectionPoint) -> T,
{
    let cfg = ExecConfig { budget, ..ExecConfig::default() };
    let mut corrupt = Some(corrupt);
    let mut outcome: Option<T> = None;
    let mut seen = 0u64;
    let result = execute_with_hook(program, &cfg, |state, ev| {
        if outcome.is_some() && corrupt.is_none() {
            return;
        }
        if let Some(ki) = kernel_index {
            if ev.kernel_index != ki {
                return;
            }
        }
        if classify(ev.opcode) != class {
            return;
        }
        if seen == index {
            let point =
                InjectionPoint { warp: ev.warp, write_mask: ev.write_mask, dest: ev.dest };
            if let Some(f) = corrupt.take() {
                outcome = Some(f(state, &point));
            }
        }
        seen += 1;
    })?;
    Ok((result, outcome))
}

/// Re-expose the manifestation kinds a campaign may inject: positive-rate,
/// non-analytic, and (unless enabled) not multi-unit.
pub fn injectable(kind: ManifestationKind, include_multi_unit: bool) -> bool {
    !kind.is_analytic() && (include_multi_unit || !kind.is_multi_unit())
}

/// Convenience for tests and studies: the destination register written by
/// the site's instruction, if the site is reachable.
pub fn peek_site_dest(
    program: &Program,
    budget: u64,
    site: &InjectionSite,
) -> Result<Option<Dest>, ExecError> {
    let kernel_index = program.kernel_index(&site.kernel).map(|i| i as u32);
    let (_, dest) = run_with_corruption(
        program,
        budget,
        kernel_index,
        site.class,
        site.index_in_class,
        |_, point| point.dest,
    )?;
    Ok(dest)
}
