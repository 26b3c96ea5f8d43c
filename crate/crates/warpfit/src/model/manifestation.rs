//! The architecture-level error shapes bridging rate tables and injection:
//! crashes, hangs, and register bit-flip patterns of increasing reach.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Which low-level bit population an observed event is attributed to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BitType {
    /// Fixed vulnerability per instruction type (pipeline latches/flops).
    F,
    /// Instruction-scoped: corrupts some instructions (e.g. fetch buffers).
    Is,
    /// Machine-scoped: corrupts many instructions (e.g. host-device plumbing).
    Im,
    Unattributed,
}

impl fmt::Display for BitType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BitType::F => "F",
            BitType::Is => "IS",
            BitType::Im => "IM",
            BitType::Unattributed => "unattributed",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestationKind {
    Crash,
    Hang,
    /// One bit of one destination register in one thread.
    SingleBit,
    /// Two distinct bits, one register, one thread.
    DoubleBit,
    /// Whole-word replacement (the "3+ bits" bucket), one thread.
    RandomValue,
    /// Random values in the same register of two threads.
    TwoThreadRandom,
    /// Same two bits flipped in the destination across all threads of a warp.
    WarpDoubleBit,
    /// Independent random values across all threads of a warp.
    WarpRandom,
    /// Zeroed destination across all threads of a warp.
    WarpZero,
    /// Random values across all threads of two warps.
    TwoWarpRandom,
}

pub const ALL_MANIFESTATIONS: [ManifestationKind; 10] = [
    ManifestationKind::Crash,
    ManifestationKind::Hang,
    ManifestationKind::SingleBit,
    ManifestationKind::DoubleBit,
    ManifestationKind::RandomValue,
    ManifestationKind::TwoThreadRandom,
    ManifestationKind::WarpDoubleBit,
    ManifestationKind::WarpRandom,
    ManifestationKind::WarpZero,
    ManifestationKind::TwoWarpRandom,
];

impl ManifestationKind {
    pub fn name(self) -> &'static str {
        match self {
            ManifestationKind::Crash => "crash",
            ManifestationKind::Hang => "hang",
            ManifestationKind::SingleBit => "single_bit",
            ManifestationKind::DoubleBit => "double_bit",
            ManifestationKind::RandomValue => "random_value",
            ManifestationKind::TwoThreadRandom => "two_thread_random",
            ManifestationKind::WarpDoubleBit => "warp_double_bit",
            ManifestationKind::WarpRandom => "warp_random",
            ManifestationKind::WarpZero => "warp_zero",
            ManifestationKind::TwoWarpRandom => "two_warp_random",
        }
    }

    pub fn from_name(s: &str) -> Option<ManifestationKind> {
        ALL_MANIFESTATIONS.iter().copied().find(|m| m.name() == s)
    }

    /// Stable ordinal used for seed derivation.
    pub fn ordinal(self) -> u64 {
        ALL_MANIFESTATIONS.iter().position(|&m| m == self).unwrap() as u64
    }

    /// Crashes and hangs are accounted analytically in composition and are
    /// never injected.
    pub fn is_analytic(self) -> bool {
        matches!(self, ManifestationKind::Crash | ManifestationKind::Hang)
    }

    /// Kinds that corrupt more than one thread or warp; excluded from
    /// default campaigns, enabled by flag.
    pub fn is_multi_unit(self) -> bool {
        matches!(self, ManifestationKind::TwoThreadRandom | ManifestationKind::TwoWarpRandom)
    }

    /// Single-thread/single-register kinds attribute to F-bits; warp-wide
    /// kinds to IS-bits; crashes and hangs carry no register attribution.
    pub fn attribution(self) -> BitType {
        match self {
            ManifestationKind::SingleBit
            | ManifestationKind::DoubleBit
            | ManifestationKind::RandomValue
            | ManifestationKind::TwoThreadRandom => BitType::F,
            ManifestationKind::WarpDoubleBit
            | ManifestationKind::WarpRandom
            | ManifestationKind::WarpZero
            | ManifestationKind::TwoWarpRandom => BitType::Is,
            ManifestationKind::Crash | ManifestationKind::Hang => BitType::Unattributed,
        }
    }
}

impl fmt::Display for ManifestationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
