//! Statistical selection of injection sites over the dynamic instruction
//! stream of a profiled program.

use crate::model::{derive_seed, ManifestationKind, RngStream};
use crate::profile::{InstructionClass, Profile};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One replayable injection site. The dynamic index counts instructions of
/// `class` within the named kernel invocation, in scheduler order. The two
/// seeds drive thread selection and bit/value selection independently.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionSite {
    pub class: InstructionClass,
    pub manifestation: ManifestationKind,
    pub kernel: String,
    pub invocation: u32,
    pub index_in_class: u64,
    pub dest_seed: u64,
    pub bit_seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SiteError {
    #[error("class {class} has no dynamic instructions in the profile")]
    ClassAbsent { class: InstructionClass },
    #[error("sample count must be at least 1")]
    ZeroSamples,
}

// Lane tags for per-site seed derivation.
const LANE_INDEX: u64 = 0;
const LANE_DEST: u64 = 1;
const LANE_BIT: u64 = 2;

/// Draw `n` sites uniformly (with replacement) over all dynamic instructions
/// of `class` across all kernel invocations. Each site is derived purely
/// from `(seed, ordinal)`, so any subrange can be regenerated independently.
pub fn select_sites(
    profile: &Profile,
    class: InstructionClass,
    manifestation: ManifestationKind,
    n: u64,
    seed: u64,
) -> Result<Vec<InjectionSite>, SiteError> {
    select_sites_in(profile, class, manifestation, seed, 0..n)
}

/// The ordinal-range form backing sharded campaigns.
pub fn select_sites_in(
    profile: &Profile,
    class: InstructionClass,
    manifestation: ManifestationKind,
    seed: u64,
    ordinals: std::ops::Range<u64>,
) -> Result<Vec<InjectionSite>, SiteError> {
    if ordinals.is_empty() {
        return Err(SiteError::ZeroSamples);
    }
    let kernels = kernel_counts(profile, class);
    let total: u64 = kernels.iter().map(|(_, c)| c).sum();
    if total == 0 {
        return Err(SiteError::ClassAbsent { class });
    }
    Ok(ordinals
        .map(|ordinal| {
            let mut index_rng = RngStream::new(derive_seed(seed, ordinal, LANE_INDEX));
            let flat = index_rng.below(total);
            let (kernel, index_in_class) = locate(&kernels, flat);
            InjectionSite {
                class,
                manifestation,
                kernel,
                invocation: 0,
                index_in_class,
                dest_seed: derive_seed(seed, ordinal, LANE_DEST),
                bit_seed: derive_seed(seed, ordinal, LANE_BIT),
            }
        })
        .collect())
}

/// Stratified variant: allocate samples per kernel proportionally to its
/// dynamic class count (largest-remainder rounding), then draw uniformly
/// within each kernel.
pub fn select_sites_stratified(
    profile: &Profile,
    class: InstructionClass,
    manifestation: ManifestationKind,
    n: u64,
    seed: u64,
) -> Result<Vec<InjectionSite>, SiteError> {
    if n == 0 {
        return Err(SiteError::ZeroSamples);
    }
    let kernels = kernel_counts(profile, class);
    let total: u64 = kernels.iter().map(|(_, c)| c).sum();
    if total == 0 {
        return Err(SiteError::ClassAbsent { class });
    }
    // Largest-remainder allocation.
    let mut alloc: Vec<(usize, u64, f64)> = kernels
        .iter()
        .enumerate()
        .filter(|(_, (_, c))| *c > 0)
        .map(|(i, (_, c))| {
            let exact = n as f64 * *c as f64 / total as f64;
            (i, exact as u64, exact - exact.floor())
        })
        .collect();
    let assigned: u64 = alloc.iter().map(|(_, a, _)| a).sum();
    let mut leftover = n - assigned;
    alloc.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    for slot in alloc.iter_mut() {
        if leftover == 0 {
            break;
        }
        slot.1 += 1;
        leftover -= 1;
    }
    alloc.sort_by_key(|(i, _, _)| *i);

    let mut sites = Vec::with_capacity(n as usize);
    let mut ordinal = 0u64;
    for (i, count, _) in alloc {
        let (name, kernel_total) = &kernels[i];
        for _ in 0..count {
            let mut index_rng = RngStream::new(derive_seed(seed, ordinal, LANE_INDEX));
            let index_in_class = index_rng.below(*kernel_total);
            sites.push(InjectionSite {
                class,
                manifestation,
                kernel: name.clone(),
                invocation: 0,
                index_in_class,
                dest_seed: derive_seed(seed, ordinal, LANE_DEST),
                bit_seed: derive_seed(seed, ordinal, LANE_BIT),
            });
            ordinal += 1;
        }
    }
    Ok(sites)
}

fn kernel_counts(profile: &Profile, class: InstructionClass) -> Vec<(String, u64)> {
    profile
        .kernels
        .iter()
        .map(|k| {
            let count = k
                .class_counts
                .iter()
                .find(|(c, _)| *c == class)
                .map(|(_, n)| *n)
                .unwrap_or(0);
            (k.name.clone(), count)
        })
        .collect()
}

fn locate(kernels: &[(String, u64)], flat: u64) -> (String, u64) {
    let mut cum = 0u64;
    for (name, count) in kernels {
        if flat < cum + count {
            return (name.clone(), flat - cum);
        }
        cum += count;
    }
    unreachable!("flat index within total")
}
