//! Campaign engine: per (class, manifestation) batches of independent
//! injections, aggregated into outcome proportions with confidence
//! intervals. Members are independent jobs; aggregation is a commutative
//! fold, so sharded and parallel runs reproduce the single-pass summary
//! byte for byte.

use super::golden::{golden_run_with, GoldenReference, DEFAULT_HANG_MULTIPLIER};
use super::run::{injectable, run_injection, InjectError, OutcomeRecord};
use super::site::{select_sites_in, select_sites_stratified, InjectionSite};
use crate::classify::{OutcomeClass, SymptomMatcher};
use crate::isa::{ExecConfig, Program};
use crate::model::{derive_seed, ManifestationKind, RateTable};
use crate::profile::{profile_with, InstructionClass, Profile};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub class: InstructionClass,
    pub manifestation: ManifestationKind,
    pub samples: u64,
    pub masked: u64,
    pub sdc: u64,
    pub arch_due: u64,
    pub potential_arch_due: u64,
    pub p_masked: f64,
    pub p_sdc: f64,
    pub p_arch_due: f64,
    pub p_potential_arch_due: f64,
    /// Wilson 95% intervals; absent when the cell has no samples.
    pub sdc_ci: Option<(f64, f64)>,
    pub masked_ci: Option<(f64, f64)>,
    pub arch_due_ci: Option<(f64, f64)>,
    pub potential_arch_due_ci: Option<(f64, f64)>,
}

impl CellSummary {
    pub fn from_counts(
        class: InstructionClass,
        manifestation: ManifestationKind,
        masked: u64,
        sdc: u64,
        arch_due: u64,
        potential_arch_due: u64,
    ) -> CellSummary {
        let samples = masked + sdc + arch_due + potential_arch_due;
        let p = |k: u64| if samples == 0 { 0.0 } else { k as f64 / samples as f64 };
        let ci = |k: u64| {
            if samples == 0 {
                None
            } else {
                Some(crate::stats::wilson_interval(k, samples, 0.95).expect("valid counts"))
            }
        };
        CellSummary {
            class,
            manifestation,
            samples,
            masked,
            sdc,
            arch_due,
            potential_arch_due,
            p_masked: p(masked),
            p_sdc: p(sdc),
            p_arch_due: p(arch_due),
            p_potential_arch_due: p(potential_arch_due),
            sdc_ci: ci(sdc),
            masked_ci: ci(masked),
            arch_due_ci: ci(arch_due),
            potential_arch_due_ci: ci(potential_arch_due),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub seed: u64,
    pub samples_per_cell: u64,
    pub program_digest: String,
    pub cells: Vec<CellSummary>,
    pub warnings: Vec<String>,
    pub total_runs: u64,
}

impl CampaignSummary {
    pub fn cell(
        &self,
        class: InstructionClass,
        manifestation: ManifestationKind,
    ) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.class == class && c.manifestation == manifestation)
    }
}

/// What to inject: every positive-rate injectable row of a rate table, or an
/// explicit list of (class, manifestation) cells.
#[derive(Clone, Debug)]
pub enum CampaignModel<'a> {
    Table(&'a RateTable),
    Cells(Vec<(InstructionClass, ManifestationKind)>),
}

#[derive(Clone, Debug)]
pub struct CampaignOptions {
    pub samples_per_cell: u64,
    pub master_seed: u64,
    pub include_multi_unit: bool,
    pub stratified: bool,
    pub jobs: usize,
    /// Restrict to site ordinals `o` with `o % shard_of == shard_index`.
    pub shard: Option<(u64, u64)>,
    pub hang_multiplier: u64,
    pub symptoms: SymptomMatcher,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        CampaignOptions {
            samples_per_cell: 0,
            master_seed: 0,
            include_multi_unit: false,
            stratified: false,
            jobs: 1,
            shard: None,
            hang_multiplier: DEFAULT_HANG_MULTIPLIER,
            symptoms: SymptomMatcher::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CampaignOutput {
    pub summary: CampaignSummary,
    /// Records ordered by (class, manifestation, site ordinal).
    pub records: Vec<OutcomeRecord>,
    pub golden: GoldenReference,
    pub profile: Profile,
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Inject(#[from] InjectError),
    #[error(transparent)]
    Golden(#[from] super::golden::GoldenError),
    #[error(transparent)]
    Profile(#[from] crate::profile::ProfileError),
    #[error("summaries disagree on {what}; refusing to merge")]
    MergeMismatch { what: String },
    #[error("nothing to merge")]
    MergeEmpty,
}

pub fn program_digest(program: &Program) -> String {
    let mut hasher = Sha256::new();
    hasher.update(program.to_asm().as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run_campaign(
    program: &Program,
    model: &CampaignModel<'_>,
    opts: &CampaignOptions,
) -> Result<CampaignOutput, CampaignError> {
    let golden = golden_run_with(program, &ExecConfig::default(), opts.hang_multiplier)?;
    let prof = profile_with(program, &ExecConfig::default())?;

    let mut warnings: Vec<String> = Vec::new();
    let mut cells: Vec<(InstructionClass, ManifestationKind)> = Vec::new();
    let candidates: Vec<(InstructionClass, ManifestationKind)> = match model {
        CampaignModel::Table(table) => table
            .rows()
            .filter(|(_, _, rate)| *rate > 0.0)
            .map(|(c, m, _)| (c, m))
            .collect(),
        CampaignModel::Cells(list) => list.clone(),
    };
    for (class, kind) in candidates {
        if kind.is_analytic() {
            // Crash/hang rows bypass injection; composition accounts them.
            continue;
        }
        if !injectable(kind, opts.include_multi_unit) {
            warnings.push(format!(
                "cell {class}/{kind}: multi-unit manifestations are excluded by default"
            ));
            continue;
        }
        if golden.class_count(class) == 0 {
            warnings.push(format!("cell {class}/{kind}: class absent from the program; skipped"));
            continue;
        }
        cells.push((class, kind));
    }
    cells.sort();
    cells.dedup();

    let mut all_records: Vec<OutcomeRecord> = Vec::new();
    let mut summaries: Vec<CellSummary> = Vec::new();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .expect("thread pool");

    for (class, kind) in &cells {
        let cell_seed = derive_seed(opts.master_seed, class.ordinal(), kind.ordinal());
        let sites: Vec<(u64, InjectionSite)> = if opts.samples_per_cell == 0 {
            Vec::new()
        } else if opts.stratified {
            select_sites_stratified(&prof, *class, *kind, opts.samples_per_cell, cell_seed)
                .map_err(InjectError::Site)?
                .into_iter()
                .enumerate()
                .map(|(i, s)| (i as u64, s))
                .collect()
        } else {
            select_sites_in(&prof, *class, *kind, cell_seed, 0..opts.samples_per_cell)
                .map_err(InjectError::Site)?
                .into_iter()
                .enumerate()
                .map(|(i, s)| (i as u64, s))
                .collect()
        };
        let sites: Vec<(u64, InjectionSite)> = match opts.shard {
            Some((index, of)) => sites.into_iter().filter(|(o, _)| o % of == index).collect(),
            None => sites,
        };

        let results: Vec<Result<OutcomeRecord, InjectError>> = pool.install(|| {
            sites
                .par_iter()
                .map(|(_, site)| run_injection(program, site, &golden, &opts.symptoms))
                .collect()
        });

        let mut masked = 0u64;
        let mut sdc = 0u64;
        let mut arch_due = 0u64;
        let mut potential = 0u64;
        for r in results {
            match r {
                Ok(record) => {
                    match record.classification {
                        OutcomeClass::Masked => masked += 1,
                        OutcomeClass::Sdc => sdc += 1,
                        OutcomeClass::ArchDue => arch_due += 1,
                        OutcomeClass::PotentialArchDue => potential += 1,
                    }
                    all_records.push(record);
                }
                // Partial failures are recorded, never dropped silently.
                Err(e) => warnings.push(format!("cell {class}/{kind}: member failed: {e}")),
            }
        }
        summaries.push(CellSummary::from_counts(*class, *kind, masked, sdc, arch_due, potential));
    }

    warnings.sort();
    warnings.dedup();
    let total_runs = summaries.iter().map(|c| c.samples).sum();
    Ok(CampaignOutput {
        summary: CampaignSummary {
            seed: opts.master_seed,
            samples_per_cell: opts.samples_per_cell,
            program_digest: program_digest(program),
            cells: summaries,
            warnings,
            total_runs,
        },
        records: all_records,
        golden,
        profile: prof,
    })
}

/// Merge shard summaries produced with the same program, seed, and sample
/// plan. Counts add; proportions and intervals are recomputed, so the merge
/// is order-independent.
pub fn merge_summaries(shards: &[CampaignSummary]) -> Result<CampaignSummary, CampaignError> {
    let first = shards.first().ok_or(CampaignError::MergeEmpty)?;
    for s in &shards[1..] {
        if s.program_digest != first.program_digest {
            return Err(CampaignError::MergeMismatch { what: "program digest".into() });
        }
        if s.seed != first.seed {
            return Err(CampaignError::MergeMismatch { what: "seed".into() });
        }
        if s.samples_per_cell != first.samples_per_cell {
            return Err(CampaignError::MergeMismatch { what: "sample plan".into() });
        }
    }
    let mut keys: Vec<(InstructionClass, ManifestationKind)> = shards
        .iter()
        .flat_map(|s| s.cells.iter().map(|c| (c.class, c.manifestation)))
        .collect();
    keys.sort();
    keys.dedup();

    let mut cells = Vec::with_capacity(keys.len());
    for (class, kind) in keys {
        let mut masked = 0u64;
        let mut sdc = 0u64;
        let mut arch_due = 0u64;
        let mut potential = 0u64;
        for s in shards {
            if let Some(c) = s.cell(class, kind) {
                masked += c.masked;
                sdc += c.sdc;
                arch_due += c.arch_due;
                potential += c.potential_arch_due;
            }
        }
        cells.push(CellSummary::from_counts(class, kind, masked, sdc, arch_due, potential));
    }
    let mut warnings: Vec<String> = shards.iter().flat_map(|s| s.warnings.clone()).collect();
    warnings.sort();
    warnings.dedup();
    let total_runs = cells.iter().map(|c| c.samples).sum();
    Ok(CampaignSummary {
        seed: first.seed,
        samples_per_cell: first.samples_per_cell,
        program_digest: first.program_digest.clone(),
        cells,
        warnings,
        total_runs,
    })
}
