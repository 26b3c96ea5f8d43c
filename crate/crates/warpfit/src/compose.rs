//! FIT-rate composition: the two-level estimate (rate tables x campaign
//! probabilities x instruction mix x issue rate), the IPA-only and APA-only
//! baselines, and beam-count reduction.
//!
//! The central quantity is
//!
//! ```text
//! FIT_SDC = ( sum_n f_n * ( sum_m pIAS[n,m] * pSDC[n,m] ) ) * s
//! ```
//!
//! where `f_n` is the dynamic fraction of instruction class `n`, `pIAS[n,m]`
//! the manifestation rate of shape `m` for that class, `pSDC[n,m]` the
//! probability the manifestation reaches the program output, and `s` the
//! issue-rate scaling factor. Crash and hang manifestations have
//! `pSDC = 0`; they feed the DUE rate instead. The issue-rate multiply
//! happens last, so the estimate is exactly linear in `s`.

use crate::inject::CampaignSummary;
use crate::model::{ManifestationKind, RateTable, Units};
use crate::profile::{InstructionClass, Profile, MODELED_CLASSES};
use crate::stats::{poisson_interval, StatsError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComposeMode {
    TwoLevel,
    IpaOnly,
    ApaOnlyProbability,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassContribution {
    pub class: InstructionClass,
    pub fraction: f64,
    /// This class's term of the SDC sum, scaled by `s`.
    pub sdc_fit: f64,
    pub sdc_interval: (f64, f64),
    pub due_fit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitEstimate {
    pub mode: ComposeMode,
    pub units: Units,
    pub issue_rate: f64,
    pub sdc_fit: f64,
    /// From substituting the campaign interval endpoints into the sum.
    pub sdc_interval: (f64, f64),
    /// Detected-failure rate: crash/hang table rows at probability one plus
    /// the detected fraction of injected manifestations, scaled by `s`.
    pub due_fit: f64,
    pub due_interval: (f64, f64),
    /// The crash/hang-row portion of the DUE rate without the issue-rate
    /// scaling, for machine-scoped faults whose rate need not track issue
    /// throughput; both forms are reported.
    pub due_fit_unscaled_analytic: f64,
    pub per_class: Vec<ClassContribution>,
    pub covered_fraction: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ComposeError {
    #[error("units mismatch: absolute output requested from a relative rate table (calibrate it first)")]
    UnitsMismatch,
    #[error("missing campaign cell for {class}/{manifestation} (strict mode)")]
    MissingCell { class: InstructionClass, manifestation: ManifestationKind },
    #[error("campaign summary lacks the {class} cell required by the uniform single-bit model")]
    ApaModelMismatch { class: InstructionClass },
    #[error("issue rate must be positive, got {0}")]
    BadIssueRate(f64),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Clone, Copy, Debug)]
pub struct ComposeOptions {
    /// Error out when a positive-rate injectable row has no campaign cell;
    /// otherwise such rows contribute zero with a warning.
    pub strict: bool,
    /// Units the caller wants the estimate in. Requesting absolute output
    /// from a relative table is refused.
    pub output_units: Units,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        ComposeOptions { strict: false, output_units: Units::Relative }
    }
}

/// pSDC and pDUE per cell, as probabilities with interval endpoints.
#[derive(Clone, Copy, Debug)]
struct CellProbabilities {
    sdc: f64,
    sdc_lo: f64,
    sdc_hi: f64,
    due: f64,
    due_lo: f64,
    due_hi: f64,
}

enum PsdcSource<'a> {
    Campaign(&'a CampaignSummary),
    /// The IPA-only assumption: every architectural manifestation becomes
    /// an SDC.
    AllOnes,
}

pub fn two_level_fit(
    profile: &Profile,
    rates: &RateTable,
    apa: &CampaignSummary,
    issue_rate: f64,
    opts: &ComposeOptions,
) -> Result<FitEstimate, ComposeError> {
    compose(profile, rates, PsdcSource::Campaign(apa), issue_rate, ComposeMode::TwoLevel, opts)
}

/// The IPA-only baseline: identical composition with every non-crash
/// `pSDC` forced to one.
pub fn ipa_only_fit(
    profile: &Profile,
    rates: &RateTable,
    issue_rate: f64,
    opts: &ComposeOptions,
) -> Result<FitEstimate, ComposeError> {
    compose(profile, rates, PsdcSource::AllOnes, issue_rate, ComposeMode::IpaOnly, opts)
}

fn compose(
    profile: &Profile,
    rates: &RateTable,
    psdc: PsdcSource<'_>,
    issue_rate: f64,
    mode: ComposeMode,
    opts: &ComposeOptions,
) -> Result<FitEstimate, ComposeError> {
    if !(issue_rate > 0.0) {
        return Err(ComposeError::BadIssueRate(issue_rate));
    }
    if opts.output_units == Units::Absolute && rates.units == Units::Relative {
        return Err(ComposeError::UnitsMismatch);
    }
    let mut warnings = Vec::new();
    let mut per_class = Vec::new();
    let mut sdc_sum = 0.0f64;
    let mut sdc_lo_sum = 0.0f64;
    let mut sdc_hi_sum = 0.0f64;
    let mut due_sum = 0.0f64;
    let mut due_lo_sum = 0.0f64;
    let mut due_hi_sum = 0.0f64;
    let mut due_analytic_unscaled = 0.0f64;

    for &class in &MODELED_CLASSES {
        let f = profile.class_fraction(class);
        let mut class_sdc = 0.0f64;
        let mut class_sdc_lo = 0.0f64;
        let mut class_sdc_hi = 0.0f64;
        let mut class_due = 0.0f64;
        let mut class_due_lo = 0.0f64;
        let mut class_due_hi = 0.0f64;
        for (kind, rate) in rates.class_rows(class) {
            if rate <= 0.0 {
                continue;
            }
            if kind.is_analytic() {
                // Crash/hang shapes never become SDCs; they are detected
                // failures with probability one.
                class_due += rate;
                class_due_lo += rate;
                class_due_hi += rate;
                due_analytic_unscaled += f * rate;
                continue;
            }
            let p = match &psdc {
                PsdcSource::AllOnes => CellProbabilities {
                    sdc: 1.0,
                    sdc_lo: 1.0,
                    sdc_hi: 1.0,
                    due: 0.0,
                    due_lo: 0.0,
                    due_hi: 0.0,
                },
                PsdcSource::Campaign(apa) => match apa.cell(class, kind) {
                    Some(cell) if cell.samples > 0 => {
                        let (lo, hi) = cell.sdc_ci.expect("samples > 0 imply an interval");
                        let (alo, ahi) = cell.arch_due_ci.expect("samples > 0 imply an interval");
                        let (plo, phi) =
                            cell.potential_arch_due_ci.expect("samples > 0 imply an interval");
                        CellProbabilities {
                            sdc: cell.p_sdc,
                            sdc_lo: lo,
                            sdc_hi: hi,
                            due: cell.p_arch_due + cell.p_potential_arch_due,
                            due_lo: alo + plo,
                            due_hi: ahi + phi,
                        }
                    }
                    _ => {
                        if opts.strict {
                            return Err(ComposeError::MissingCell { class, manifestation: kind });
                        }
                        warnings.push(format!(
                            "no campaign samples for {class}/{kind}; the row contributes zero"
                        ));
                        CellProbabilities {
                            sdc: 0.0,
                            sdc_lo: 0.0,
                            sdc_hi: 0.0,
                            due: 0.0,
                            due_lo: 0.0,
                            due_hi: 0.0,
                        }
                    }
                },
            };
            class_sdc += rate * p.sdc;
            class_sdc_lo += rate * p.sdc_lo;
            class_sdc_hi += rate * p.sdc_hi;
            class_due += rate * p.due;
            class_due_lo += rate * p.due_lo;
            class_due_hi += rate * p.due_hi;
        }
        let term = f * class_sdc;
        sdc_sum += term;
        sdc_lo_sum += f * class_sdc_lo;
        sdc_hi_sum += f * class_sdc_hi;
        due_sum += f * class_due;
        due_lo_sum += f * class_due_lo;
        due_hi_sum += f * class_due_hi;
        per_class.push(ClassContribution {
            class,
            fraction: f,
            sdc_fit: term * issue_rate,
            sdc_interval: (f * class_sdc_lo * issue_rate, f * class_sdc_hi * issue_rate),
            due_fit: f * class_due * issue_rate,
        });
    }

    Ok(FitEstimate {
        mode,
        units: rates.units,
        issue_rate,
        sdc_fit: sdc_sum * issue_rate,
        sdc_interval: (sdc_lo_sum * issue_rate, sdc_hi_sum * issue_rate),
        due_fit: due_sum * issue_rate,
        due_interval: (due_lo_sum * issue_rate, due_hi_sum * issue_rate),
        due_fit_unscaled_analytic: due_analytic_unscaled,
        per_class,
        covered_fraction: profile.covered_fraction,
        warnings,
    })
}

/// APA-only result: a probability of SDC given an architecture-level error,
/// not a rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApaOnlyEstimate {
    pub mode: ComposeMode,
    pub probability: f64,
    pub interval: (f64, f64),
    pub per_class: Vec<(InstructionClass, f64)>,
    pub covered_fraction: f64,
}

/// The uniform-injection baseline: single-bit flips for every class except
/// FFMA (random value, which has no single-bit manifestations) and BRA
/// (counted as a detected failure outright, so `pSDC = 0`). Classes are
/// weighted by their dynamic fraction within the covered mix. Rate tables
/// play no part here.
pub fn apa_only_sdc(
    profile: &Profile,
    campaign: &CampaignSummary,
) -> Result<ApaOnlyEstimate, ComposeError> {
    let covered: f64 = MODELED_CLASSES.iter().map(|&c| profile.class_fraction(c)).sum();
    let mut probability = 0.0f64;
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    let mut per_class = Vec::new();
    for &class in &MODELED_CLASSES {
        let f = profile.class_fraction(class);
        if f == 0.0 {
            continue;
        }
        let weight = f / covered;
        if class == InstructionClass::Bra {
            // Branch corruption is assumed detected: pSDC = 0.
            per_class.push((class, 0.0));
            continue;
        }
        let kind = apa_only_model(class);
        let cell = campaign
            .cell(class, kind)
            .filter(|c| c.samples > 0)
            .ok_or(ComposeError::ApaModelMismatch { class })?;
        let (ci_lo, ci_hi) = cell.sdc_ci.expect("samples > 0 imply an interval");
        probability += weight * cell.p_sdc;
        lo += weight * ci_lo;
        hi += weight * ci_hi;
        per_class.push((class, cell.p_sdc));
    }
    Ok(ApaOnlyEstimate {
        mode: ComposeMode::ApaOnlyProbability,
        probability,
        interval: (lo, hi),
        per_class,
        covered_fraction: profile.covered_fraction,
    })
}

/// The manifestation each class receives under the uniform model.
pub fn apa_only_model(class: InstructionClass) -> ManifestationKind {
    if class == InstructionClass::Ffma {
        ManifestationKind::RandomValue
    } else {
        ManifestationKind::SingleBit
    }
}

/// Normalize a batch of APA-only probabilities to the highest observed.
pub fn normalize_batch(values: &[(String, f64)]) -> Vec<(String, f64)> {
    let max = values.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|(name, v)| (name.clone(), if max > 0.0 { v / max } else { 0.0 }))
        .collect()
}

/// An accelerated-beam exposure: observed events over a neutron fluence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamRun {
    pub events: u64,
    /// Integrated particle count per area, neutrons/cm^2.
    pub fluence: f64,
    /// Reference sea-level flux, neutrons/cm^2/hour.
    pub flux: f64,
}

/// Sea-level reference flux in neutrons/cm^2/hour.
pub const REFERENCE_FLUX: f64 = 13.0;

impl BeamRun {
    pub fn new(events: u64, fluence: f64) -> BeamRun {
        BeamRun { events, fluence, flux: REFERENCE_FLUX }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamFit {
    pub fit: f64,
    /// Exact Poisson 95% interval on the event count, propagated.
    pub interval: (f64, f64),
    /// Cross section in cm^2: events per unit fluence.
    pub cross_section: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum BeamError {
    #[error("fluence must be positive, got {0}")]
    ZeroFluence(f64),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Reduce a beam run to a FIT rate: cross section sigma = events/fluence,
/// FIT = sigma * flux * 1e9. Ordered as `(events * flux * 1e9) / fluence`
/// so integer-valued inputs stay exact.
pub fn fit_from_beam(run: &BeamRun) -> Result<BeamFit, BeamError> {
    if !(run.fluence > 0.0) {
        return Err(BeamError::ZeroFluence(run.fluence));
    }
    let reduce = |events: f64| events * run.flux * 1e9 / run.fluence;
    let (lo, hi) = poisson_interval(run.events, 0.95)?;
    Ok(BeamFit {
        fit: reduce(run.events as f64),
        interval: (reduce(lo), reduce(hi)),
        cross_section: run.events as f64 / run.fluence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inject::CellSummary;
    use crate::model::parse_rate_table;

    fn uniform_profile() -> Profile {
        let f = 1.0 / 7.0;
        Profile::from_fractions(
            &MODELED_CLASSES.iter().map(|&c| (c, f)).collect::<Vec<_>>(),
            1.0,
        )
    }

    fn summary_from_cells(cells: Vec<CellSummary>) -> CampaignSummary {
        let total = cells.iter().map(|c| c.samples).sum();
        CampaignSummary {
            seed: 0,
            samples_per_cell: 10,
            program_digest: "test".into(),
            cells,
            warnings: vec![],
            total_runs: total,
        }
    }

    #[test]
    fn one_term_arithmetic() {
        // f=1, pIAS=0.5, pSDC=0.2, s=2 -> 0.5 * 0.2 * 2 = 0.2
        let profile = Profile::from_fractions(&[(InstructionClass::Iadd, 1.0)], 1.0);
        let rates = RateTable::from_rows(
            Units::Relative,
            [(InstructionClass::Iadd, ManifestationKind::SingleBit, 0.5)],
        )
        .unwrap();
        let apa = summary_from_cells(vec![CellSummary::from_counts(
            InstructionClass::Iadd,
            ManifestationKind::SingleBit,
            8,
            2,
            0,
            0,
        )]);
        let est = two_level_fit(&profile, &rates, &apa, 2.0, &ComposeOptions::default()).unwrap();
        assert!((est.sdc_fit - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_psdc_means_zero_fit() {
        let profile = uniform_profile();
        let rates = parse_rate_table(
            "class,manifestation,rate\nIADD,TOTAL,0.7\nIADD,single_bit,0.7\n",
        )
        .unwrap();
        let apa = summary_from_cells(vec![CellSummary::from_counts(
            InstructionClass::Iadd,
            ManifestationKind::SingleBit,
            10,
            0,
            0,
            0,
        )]);
        let est = two_level_fit(&profile, &rates, &apa, 1.0, &ComposeOptions::default()).unwrap();
        assert_eq!(est.sdc_fit, 0.0);
    }

    #[test]
    fn crash_rows_feed_due_not_sdc() {
        let profile = Profile::from_fractions(&[(InstructionClass::Bra, 1.0)], 1.0);
        let rates = parse_rate_table("class,manifestation,rate\nBRA,TOTAL,0.21\nBRA,crash,0.21\n")
            .unwrap();
        let apa = summary_from_cells(vec![]);
        let est = two_level_fit(&profile, &rates, &apa, 2.0, &ComposeOptions::default()).unwrap();
        assert_eq!(est.sdc_fit, 0.0);
        assert!((est.due_fit - 0.42).abs() < 1e-15);
        assert!((est.due_fit_unscaled_analytic - 0.21).abs() < 1e-15);
    }

    #[test]
    fn linearity_in_issue_rate_is_exact() {
        let profile = uniform_profile();
        let rates = parse_rate_table(
            "class,manifestation,rate\nIADD,TOTAL,0.7\nIADD,single_bit,0.54\nIADD,double_bit,0.16\n",
        )
        .unwrap();
        let apa = summary_from_cells(vec![
            CellSummary::from_counts(InstructionClass::Iadd, ManifestationKind::SingleBit, 7, 3, 0, 0),
            CellSummary::from_counts(InstructionClass::Iadd, ManifestationKind::DoubleBit, 6, 3, 1, 0),
        ]);
        let opts = ComposeOptions::default();
        let a = two_level_fit(&profile, &rates, &apa, 1.25, &opts).unwrap();
        let b = two_level_fit(&profile, &rates, &apa, 2.5, &opts).unwrap();
        assert_eq!(b.sdc_fit, 2.0 * a.sdc_fit);
    }

    #[test]
    fn ipa_only_dominates_two_level_per_class() {
        let profile = uniform_profile();
        let rates = parse_rate_table(
            "\
class,manifestation,rate
IADD,TOTAL,0.70
IADD,single_bit,0.54
IADD,double_bit,0.08
IADD,random_value,0.08
ISETP,TOTAL,0.67
ISETP,single_bit,0.67
",
        )
        .unwrap();
        let apa = summary_from_cells(vec![
            CellSummary::from_counts(InstructionClass::Iadd, ManifestationKind::SingleBit, 5, 3, 2, 0),
            CellSummary::from_counts(InstructionClass::Iadd, ManifestationKind::DoubleBit, 4, 4, 2, 0),
            CellSummary::from_counts(InstructionClass::Iadd, ManifestationKind::RandomValue, 2, 6, 2, 0),
            CellSummary::from_counts(InstructionClass::Isetp, ManifestationKind::SingleBit, 9, 1, 0, 0),
        ]);
        let opts = ComposeOptions::default();
        let tl = two_level_fit(&profile, &rates, &apa, 1.5, &opts).unwrap();
        let ipa = ipa_only_fit(&profile, &rates, 1.5, &opts).unwrap();
        assert!(ipa.sdc_fit >= tl.sdc_fit);
        for (t, i) in tl.per_class.iter().zip(ipa.per_class.iter()) {
            assert!(i.sdc_fit >= t.sdc_fit, "{:?}", t.class);
        }
    }

    #[test]
    fn ipa_only_equals_two_level_when_psdc_is_one() {
        let profile = uniform_profile();
        let rates = parse_rate_table(
            "class,manifestation,rate\nIADD,TOTAL,0.7\nIADD,single_bit,0.7\n",
        )
        .unwrap();
        let apa = summary_from_cells(vec![CellSummary::from_counts(
            InstructionClass::Iadd,
            ManifestationKind::SingleBit,
            0,
            10,
            0,
            0,
        )]);
        let opts = ComposeOptions::default();
        let tl = two_level_fit(&profile, &rates, &apa, 1.0, &opts).unwrap();
        let ipa = ipa_only_fit(&profile, &rates, 1.0, &opts).unwrap();
        assert!((tl.sdc_fit - ipa.sdc_fit).abs() < 1e-15);
    }

    #[test]
    fn strict_mode_rejects_missing_cells() {
        let profile = uniform_profile();
        let rates = parse_rate_table(
            "class,manifestation,rate\nIADD,TOTAL,0.7\nIADD,single_bit,0.7\n",
        )
        .unwrap();
        let apa = summary_from_cells(vec![]);
        let opts = ComposeOptions { strict: true, ..Default::default() };
        let err = two_level_fit(&profile, &rates, &apa, 1.0, &opts).unwrap_err();
        assert_eq!(
            err,
            ComposeError::MissingCell {
                class: InstructionClass::Iadd,
                manifestation: ManifestationKind::SingleBit
            }
        );
        // Non-strict: contributes zero, with a warning.
        let est = two_level_fit(&profile, &rates, &apa, 1.0, &ComposeOptions::default()).unwrap();
        assert_eq!(est.sdc_fit, 0.0);
        assert_eq!(est.warnings.len(), 1);
    }

    #[test]
    fn absolute_output_from_relative_table_is_refused() {
        let profile = uniform_profile();
        let rates = parse_rate_table(
            "# units=relative\nclass,manifestation,rate\nIADD,TOTAL,0.7\nIADD,single_bit,0.7\n",
        )
        .unwrap();
        let apa = summary_from_cells(vec![]);
        let opts = ComposeOptions { strict: false, output_units: Units::Absolute };
        assert_eq!(
            two_level_fit(&profile, &rates, &apa, 1.0, &opts).unwrap_err(),
            ComposeError::UnitsMismatch
        );
        // Calibration makes it legal.
        let abs = rates.calibrate(3.0);
        assert!(two_level_fit(&profile, &abs, &apa, 1.0, &opts).is_ok());
    }

    #[test]
    fn apa_only_pools_proportions() {
        // 200 SDC / 1000 runs, uniform f over two classes with equal pSDC.
        let profile = Profile::from_fractions(
            &[(InstructionClass::Iadd, 0.5), (InstructionClass::Isetp, 0.5)],
            1.0,
        );
        let apa = summary_from_cells(vec![
            CellSummary::from_counts(InstructionClass::Iadd, ManifestationKind::SingleBit, 400, 100, 0, 0),
            CellSummary::from_counts(InstructionClass::Isetp, ManifestationKind::SingleBit, 400, 100, 0, 0),
        ]);
        let est = apa_only_sdc(&profile, &apa).unwrap();
        assert!((est.probability - 0.2).abs() < 1e-15);
    }

    #[test]
    fn all_bra_program_has_zero_apa_only_sdc() {
        let profile = Profile::from_fractions(&[(InstructionClass::Bra, 1.0)], 1.0);
        let apa = summary_from_cells(vec![]);
        let est = apa_only_sdc(&profile, &apa).unwrap();
        assert_eq!(est.probability, 0.0);
    }

    #[test]
    fn apa_only_uses_random_value_for_ffma() {
        assert_eq!(apa_only_model(InstructionClass::Ffma), ManifestationKind::RandomValue);
        assert_eq!(apa_only_model(InstructionClass::Iadd), ManifestationKind::SingleBit);
        let profile = Profile::from_fractions(&[(InstructionClass::Ffma, 1.0)], 1.0);
        // A single-bit cell does not satisfy the FFMA model.
        let apa = summary_from_cells(vec![CellSummary::from_counts(
            InstructionClass::Ffma,
            ManifestationKind::SingleBit,
            5,
            5,
            0,
            0,
        )]);
        assert_eq!(
            apa_only_sdc(&profile, &apa).unwrap_err(),
            ComposeError::ApaModelMismatch { class: InstructionClass::Ffma }
        );
    }

    #[test]
    fn batch_normalization_scales_to_max() {
        let out = normalize_batch(&[("a".into(), 0.43), ("b".into(), 0.215)]);
        assert!((out[0].1 - 1.0).abs() < 1e-15);
        assert!((out[1].1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn beam_reduction_unit_case_is_exact() {
        let fit = fit_from_beam(&BeamRun::new(1, 1e9)).unwrap();
        assert_eq!(fit.fit, 13.0);
    }

    #[test]
    fn zero_events_zero_fit_positive_upper_bound() {
        let fit = fit_from_beam(&BeamRun::new(0, 1e9)).unwrap();
        assert_eq!(fit.fit, 0.0);
        assert_eq!(fit.interval.0, 0.0);
        assert!(fit.interval.1 > 0.0);
    }

    #[test]
    fn doubling_fluence_halves_fit() {
        let a = fit_from_beam(&BeamRun::new(4, 1e9)).unwrap();
        let b = fit_from_beam(&BeamRun::new(4, 2e9)).unwrap();
        assert!((a.fit - 2.0 * b.fit).abs() < 1e-9);
    }

    #[test]
    fn zero_fluence_is_rejected() {
        assert_eq!(
            fit_from_beam(&BeamRun { events: 1, fluence: 0.0, flux: 13.0 }).unwrap_err(),
            BeamError::ZeroFluence(0.0)
        );
    }

    #[test]
    fn rank_invariance_under_table_scaling() {
        let opts = ComposeOptions::default();
        let rates = parse_rate_table(
            "class,manifestation,rate\nIADD,TOTAL,0.7\nIADD,single_bit,0.7\n",
        )
        .unwrap();
        let apa_hot = summary_from_cells(vec![CellSummary::from_counts(
            InstructionClass::Iadd,
            ManifestationKind::SingleBit,
            2,
            8,
            0,
            0,
        )]);
        let apa_cold = summary_from_cells(vec![CellSummary::from_counts(
            InstructionClass::Iadd,
            ManifestationKind::SingleBit,
            8,
            2,
            0,
            0,
        )]);
        let profile = Profile::from_fractions(&[(InstructionClass::Iadd, 1.0)], 1.0);
        let scaled = rates.calibrate(5.0);
        let hot = two_level_fit(&profile, &rates, &apa_hot, 1.0, &opts).unwrap();
        let cold = two_level_fit(&profile, &rates, &apa_cold, 1.0, &opts).unwrap();
        let hot_s = two_level_fit(&profile, &scaled, &apa_hot, 1.0, &opts).unwrap();
        let cold_s = two_level_fit(&profile, &scaled, &apa_cold, 1.0, &opts).unwrap();
        assert!((hot_s.sdc_fit / hot.sdc_fit - 5.0).abs() < 1e-12);
        assert!((cold_s.sdc_fit / cold.sdc_fit - 5.0).abs() < 1e-12);
        assert_eq!(hot.sdc_fit > cold.sdc_fit, hot_s.sdc_fit > cold_s.sdc_fit);
    }
}
