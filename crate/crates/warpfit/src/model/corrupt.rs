//! Applying a manifestation to machine state at an injection point, plus
//! rate-proportional manifestation sampling.
//!
//! Bit flips are XORs, so re-applying the same flip restores the pre-image.
//! Crash and Hang manifestations never mutate state; they are accounted
//! analytically during composition.

use super::manifestation::ManifestationKind;
use super::rate_table::RateTable;
use super::rng::RngStream;
use crate::isa::{Dest, MachineState};
use crate::profile::InstructionClass;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Where a corruption lands: one instruction's destination, immediately
/// after the write, in one warp.
#[derive(Clone, Copy, Debug)]
pub struct InjectionPoint {
    pub warp: u32,
    /// Threads that wrote the destination (active ∩ guard).
    pub write_mask: u64,
    pub dest: Dest,
}

/// One corrupted cell: a register or predicate of one thread, before/after.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptedCell {
    pub warp: u32,
    pub thread: u32,
    pub dest: Dest,
    pub before: u32,
    pub after: u32,
}

/// Exact description of the state mutation an injection performed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CorruptionDescriptor {
    pub kind: Option<ManifestationKind>,
    pub cells: Vec<CorruptedCell>,
}

impl CorruptionDescriptor {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Distinct (warp, pc-implied instruction) pairs touched; campaigns
    /// assert single-fault discipline through the cell list instead, since
    /// every apply call corrupts exactly one instruction's destination.
    pub fn touched_threads(&self) -> usize {
        self.cells.len()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CorruptError {
    #[error("no injectable destination")]
    NoDestination,
    #[error("manifestation {kind} cannot target a predicate destination")]
    IncompatibleDest { kind: ManifestationKind },
    #[error("manifestation {kind} needs {needed} active threads, found {found}")]
    InsufficientThreads { kind: ManifestationKind, needed: u32, found: u32 },
    #[error("manifestation {kind} needs at least two warps")]
    InsufficientWarps { kind: ManifestationKind },
    #[error("class {class} has no manifestations")]
    EmptyClassRow { class: InstructionClass },
}

/// Mutate `state` at `point` according to `kind`. `dest_rng` drives thread
/// selection; `value_rng` drives bit positions and replacement values.
/// Returns a descriptor that exactly explains the diff.
pub fn apply_manifestation(
    state: &mut MachineState,
    point: &InjectionPoint,
    kind: ManifestationKind,
    dest_rng: &mut RngStream,
    value_rng: &mut RngStream,
) -> Result<CorruptionDescriptor, CorruptError> {
    let mut descriptor = CorruptionDescriptor { kind: Some(kind), cells: Vec::new() };
    if kind.is_analytic() {
        return Ok(descriptor);
    }
    // A guarded write may have enabled no threads; the corruption then has
    // nothing to land on and the run proceeds untouched.
    if point.write_mask == 0 {
        return Ok(descriptor);
    }
    let active = point.write_mask.count_ones();

    match kind {
        ManifestationKind::SingleBit | ManifestationKind::DoubleBit | ManifestationKind::RandomValue => {
            let thread = dest_rng.pick_set_bit(point.write_mask);
            match point.dest {
                Dest::Gpr(reg) => {
                    let mask = match kind {
                        ManifestationKind::SingleBit => 1u32 << value_rng.below(32),
                        ManifestationKind::DoubleBit => {
                            let b1 = value_rng.below(32) as u32;
                            let b2 = loop {
                                let b = value_rng.below(32) as u32;
                                if b != b1 {
                                    break b;
                                }
                            };
                            (1 << b1) | (1 << b2)
                        }
                        ManifestationKind::RandomValue => {
                            let before = state.reg(point.warp, thread, reg);
                            value_rng.next_u32() ^ before
                        }
                        _ => unreachable!(),
                    };
                    flip_gpr(state, &mut descriptor, point.warp, thread, reg, mask);
                }
                Dest::Pred(p) => match kind {
                    // A predicate is one bit: both the single-bit flip and
                    // the random-value bucket degrade to a toggle.
                    ManifestationKind::SingleBit | ManifestationKind::RandomValue => {
                        toggle_pred(state, &mut descriptor, point.warp, thread, p);
                    }
                    _ => return Err(CorruptError::IncompatibleDest { kind }),
                },
            }
        }
        ManifestationKind::TwoThreadRandom => {
            if active < 2 {
                return Err(CorruptError::InsufficientThreads { kind, needed: 2, found: active });
            }
            let Dest::Gpr(reg) = point.dest else {
                return Err(CorruptError::IncompatibleDest { kind });
            };
            let t1 = dest_rng.pick_set_bit(point.write_mask);
            let t2 = dest_rng.pick_set_bit(point.write_mask & !(1 << t1));
            for thread in [t1.min(t2), t1.max(t2)] {
                let before = state.reg(point.warp, thread, reg);
                flip_gpr(state, &mut descriptor, point.warp, thread, reg, value_rng.next_u32() ^ before);
            }
        }
        ManifestationKind::WarpDoubleBit => {
            let Dest::Gpr(reg) = point.dest else {
                return Err(CorruptError::IncompatibleDest { kind });
            };
            // One corrupted instruction encoding yields the same two flipped
            // bit positions in every thread.
            let b1 = value_rng.below(32) as u32;
            let b2 = loop {
                let b = value_rng.below(32) as u32;
                if b != b1 {
                    break b;
                }
            };
            let mask = (1u32 << b1) | (1 << b2);
            for thread in iter_mask(point.write_mask) {
                flip_gpr(state, &mut descriptor, point.warp, thread, reg, mask);
            }
        }
        ManifestationKind::WarpRandom => {
            let Dest::Gpr(reg) = point.dest else {
                return Err(CorruptError::IncompatibleDest { kind });
            };
            for thread in iter_mask(point.write_mask) {
                let before = state.reg(point.warp, thread, reg);
                flip_gpr(state, &mut descriptor, point.warp, thread, reg, value_rng.next_u32() ^ before);
            }
        }
        ManifestationKind::WarpZero => {
            let Dest::Gpr(reg) = point.dest else {
                return Err(CorruptError::IncompatibleDest { kind });
            };
            for thread in iter_mask(point.write_mask) {
                let before = state.reg(point.warp, thread, reg);
                flip_gpr(state, &mut descriptor, point.warp, thread, reg, before);
            }
        }
        ManifestationKind::TwoWarpRandom => {
            let Dest::Gpr(reg) = point.dest else {
                return Err(CorruptError::IncompatibleDest { kind });
            };
            if state.warp_count() < 2 {
                return Err(CorruptError::InsufficientWarps { kind });
            }
            let other = (point.warp + 1) % state.warp_count();
            for thread in iter_mask(point.write_mask) {
                let before = state.reg(point.warp, thread, reg);
                flip_gpr(state, &mut descriptor, point.warp, thread, reg, value_rng.next_u32() ^ before);
            }
            // The second warp is corrupted mid-flight in whatever state it
            // holds; all of its threads are touched.
            for thread in 0..state.threads_per_warp() {
                let before = state.reg(other, thread, reg);
                flip_gpr(state, &mut descriptor, other, thread, reg, value_rng.next_u32() ^ before);
            }
        }
        ManifestationKind::Crash | ManifestationKind::Hang => unreachable!(),
    }
    Ok(descriptor)
}

fn flip_gpr(
    state: &mut MachineState,
    descriptor: &mut CorruptionDescriptor,
    warp: u32,
    thread: u32,
    reg: u8,
    mask: u32,
) {
    if mask == 0 {
        return;
    }
    let before = state.reg(warp, thread, reg);
    state.xor_reg(warp, thread, reg, mask);
    descriptor.cells.push(CorruptedCell {
        warp,
        thread,
        dest: Dest::Gpr(reg),
        before,
        after: before ^ mask,
    });
}

fn toggle_pred(
    state: &mut MachineState,
    descriptor: &mut CorruptionDescriptor,
    warp: u32,
    thread: u32,
    pred: u8,
) {
    let before = state.pred(warp, thread, pred);
    state.set_pred(warp, thread, pred, !before);
    descriptor.cells.push(CorruptedCell {
        warp,
        thread,
        dest: Dest::Pred(pred),
        before: before as u32,
        after: !before as u32,
    });
}

fn iter_mask(mask: u64) -> impl Iterator<Item = u32> {
    (0..64u32).filter(move |t| mask >> t & 1 == 1)
}

/// Draw a manifestation for `class` proportionally to its rate-table row.
pub fn sample_manifestation(
    table: &RateTable,
    class: InstructionClass,
    rng: &mut RngStream,
) -> Result<ManifestationKind, CorruptError> {
    let rows = table.class_rows(class);
    let total: f64 = rows.iter().map(|(_, r)| r).sum();
    if total <= 0.0 {
        return Err(CorruptError::EmptyClassRow { class });
    }
    let x = rng.f64() * total;
    let mut cum = 0.0;
    for (kind, rate) in &rows {
        cum += rate;
        if x < cum {
            return Ok(*kind);
        }
    }
    Ok(rows.last().unwrap().0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{execute_with_hook, parse_program, ExecConfig, Opcode};
    use crate::model::rate_table::{parse_rate_table, Units};

    /// Run a tiny program and hand the state to `f` right after its IADD.
    fn with_state_at_iadd<R>(tpw: u32, warps: u32, f: impl FnOnce(&mut MachineState, InjectionPoint) -> R) -> R {
        let src = format!(
            ".threads_per_warp {tpw}\n.warps {warps}\n.kernel k\nMOVI R1, 0xDEADBEEF\nIADD R2, R1, R1\nMOVI R3, 1\nEXIT\n"
        );
        let p = parse_program(&src).unwrap();
        let mut out = None;
        let mut f = Some(f);
        execute_with_hook(&p, &ExecConfig::default(), |state, ev| {
            if ev.opcode == Opcode::Iadd && ev.warp == 0 {
                let point = InjectionPoint { warp: 0, write_mask: ev.write_mask, dest: ev.dest };
                if let Some(f) = f.take() {
                    out = Some(f(state, point));
                }
            }
        })
        .unwrap();
        out.unwrap()
    }

    #[test]
    fn single_bit_flip_changes_exactly_one_bit() {
        with_state_at_iadd(4, 1, |state, point| {
            let mut dest_rng = RngStream::new(1);
            let mut value_rng = RngStream::new(2);
            let before: Vec<u32> = (0..4).map(|t| state.reg(0, t, 2)).collect();
            let d = apply_manifestation(state, &point, ManifestationKind::SingleBit, &mut dest_rng, &mut value_rng)
                .unwrap();
            assert_eq!(d.cells.len(), 1);
            let cell = d.cells[0];
            assert_eq!((cell.before ^ cell.after).count_ones(), 1);
            for t in 0..4u32 {
                let now = state.reg(0, t, 2);
                if t == cell.thread {
                    assert_eq!(now, cell.after);
                } else {
                    assert_eq!(now, before[t as usize]);
                }
            }
        });
    }

    #[test]
    fn flip_bit_zero_of_zero_word() {
        // The defining example: flipping bit 0 of 0x00000000 gives 0x00000001.
        assert_eq!(0x0000_0000u32 ^ (1 << 0), 0x0000_0001);
    }

    #[test]
    fn double_bit_flip_has_hamming_distance_two() {
        with_state_at_iadd(4, 1, |state, point| {
            let mut dest_rng = RngStream::new(3);
            let mut value_rng = RngStream::new(4);
            let d = apply_manifestation(state, &point, ManifestationKind::DoubleBit, &mut dest_rng, &mut value_rng)
                .unwrap();
            let cell = d.cells[0];
            assert_eq!((cell.before ^ cell.after).count_ones(), 2);
        });
    }

    #[test]
    fn flips_are_involutions() {
        for kind in [ManifestationKind::SingleBit, ManifestationKind::DoubleBit] {
            with_state_at_iadd(4, 1, |state, point| {
                let before: Vec<u32> = (0..4).map(|t| state.reg(0, t, 2)).collect();
                let d1 = apply_manifestation(
                    state,
                    &point,
                    kind,
                    &mut RngStream::new(11),
                    &mut RngStream::new(12),
                )
                .unwrap();
                // Same seeds pick the same thread and bits: applying twice
                // restores the pre-image.
                let d2 = apply_manifestation(
                    state,
                    &point,
                    kind,
                    &mut RngStream::new(11),
                    &mut RngStream::new(12),
                )
                .unwrap();
                assert_eq!(d1.cells[0].after, d2.cells[0].before);
                for t in 0..4u32 {
                    assert_eq!(state.reg(0, t, 2), before[t as usize]);
                }
            });
        }
    }

    #[test]
    fn descriptor_exactly_explains_the_diff() {
        for kind in [
            ManifestationKind::SingleBit,
            ManifestationKind::DoubleBit,
            ManifestationKind::RandomValue,
            ManifestationKind::TwoThreadRandom,
            ManifestationKind::WarpDoubleBit,
            ManifestationKind::WarpRandom,
            ManifestationKind::WarpZero,
        ] {
            with_state_at_iadd(8, 1, |state, point| {
                let before: Vec<u32> = (0..8).map(|t| state.reg(0, t, 2)).collect();
                let d = apply_manifestation(
                    state,
                    &point,
                    kind,
                    &mut RngStream::new(21),
                    &mut RngStream::new(22),
                )
                .unwrap();
                for t in 0..8u32 {
                    let now = state.reg(0, t, 2);
                    match d.cells.iter().find(|c| c.thread == t && c.warp == 0) {
                        Some(cell) => {
                            assert_eq!(cell.before, before[t as usize], "{kind}");
                            assert_eq!(now, cell.after, "{kind}");
                            assert_ne!(cell.before, cell.after, "{kind}");
                        }
                        None => assert_eq!(now, before[t as usize], "{kind}"),
                    }
                }
            });
        }
    }

    #[test]
    fn warp_wide_kinds_touch_all_threads() {
        with_state_at_iadd(8, 1, |state, point| {
            let d = apply_manifestation(
                state,
                &point,
                ManifestationKind::WarpDoubleBit,
                &mut RngStream::new(5),
                &mut RngStream::new(6),
            )
            .unwrap();
            assert_eq!(d.cells.len(), 8);
            let mask0 = d.cells[0].before ^ d.cells[0].after;
            assert_eq!(mask0.count_ones(), 2);
            for c in &d.cells {
                assert_eq!(c.before ^ c.after, mask0, "same positions across the warp");
            }
        });
    }

    #[test]
    fn warp_zero_zeroes() {
        with_state_at_iadd(4, 1, |state, point| {
            apply_manifestation(
                state,
                &point,
                ManifestationKind::WarpZero,
                &mut RngStream::new(7),
                &mut RngStream::new(8),
            )
            .unwrap();
            for t in 0..4 {
                assert_eq!(state.reg(0, t, 2), 0);
            }
        });
    }

    #[test]
    fn two_warp_random_needs_two_warps() {
        with_state_at_iadd(4, 1, |state, point| {
            let err = apply_manifestation(
                state,
                &point,
                ManifestationKind::TwoWarpRandom,
                &mut RngStream::new(7),
                &mut RngStream::new(8),
            )
            .unwrap_err();
            assert_eq!(err, CorruptError::InsufficientWarps { kind: ManifestationKind::TwoWarpRandom });
        });
        with_state_at_iadd(4, 2, |state, point| {
            let d = apply_manifestation(
                state,
                &point,
                ManifestationKind::TwoWarpRandom,
                &mut RngStream::new(7),
                &mut RngStream::new(8),
            )
            .unwrap();
            let warps: std::collections::BTreeSet<u32> = d.cells.iter().map(|c| c.warp).collect();
            assert_eq!(warps.len(), 2);
        });
    }

    #[test]
    fn crash_and_hang_do_not_mutate() {
        with_state_at_iadd(4, 1, |state, point| {
            let before: Vec<u32> = (0..4).map(|t| state.reg(0, t, 2)).collect();
            for kind in [ManifestationKind::Crash, ManifestationKind::Hang] {
                let d = apply_manifestation(state, &point, kind, &mut RngStream::new(1), &mut RngStream::new(2))
                    .unwrap();
                assert!(d.is_empty());
            }
            for t in 0..4u32 {
                assert_eq!(state.reg(0, t, 2), before[t as usize]);
            }
        });
    }

    #[test]
    fn random_value_bits_are_balanced() {
        // Frequency oracle: each bit of the replacement value should be set
        // about half the time over many draws.
        let mut rng = RngStream::new(1234);
        let n = 100_000u32;
        let mut ones = [0u32; 32];
        for _ in 0..n {
            let v = rng.next_u32();
            for (b, count) in ones.iter_mut().enumerate() {
                *count += v >> b & 1;
            }
        }
        for (b, count) in ones.iter().enumerate() {
            let freq = *count as f64 / n as f64;
            assert!((freq - 0.5).abs() < 0.01, "bit {b} frequency {freq}");
        }
    }

    #[test]
    fn sampling_follows_rate_ratios() {
        let table = parse_rate_table(
            "class,manifestation,rate\nIADD,TOTAL,0.70\nIADD,single_bit,0.54\nIADD,double_bit,0.08\nIADD,random_value,0.08\n",
        )
        .unwrap();
        let mut rng = RngStream::new(99);
        let n = 100_000;
        let mut singles = 0u32;
        for _ in 0..n {
            if sample_manifestation(&table, InstructionClass::Iadd, &mut rng).unwrap()
                == ManifestationKind::SingleBit
            {
                singles += 1;
            }
        }
        let freq = singles as f64 / n as f64;
        assert!((freq - 0.54 / 0.70).abs() < 0.01, "single_bit frequency {freq}");
    }

    #[test]
    fn single_entry_row_always_wins() {
        let table = parse_rate_table(
            "class,manifestation,rate\nISETP,TOTAL,0.67\nISETP,single_bit,0.67\n",
        )
        .unwrap();
        let mut rng = RngStream::new(5);
        for _ in 0..100 {
            assert_eq!(
                sample_manifestation(&table, InstructionClass::Isetp, &mut rng).unwrap(),
                ManifestationKind::SingleBit
            );
        }
    }

    #[test]
    fn uniform_two_entry_row_is_balanced() {
        let table = RateTable::from_rows(
            Units::Relative,
            [
                (InstructionClass::Iadd, ManifestationKind::SingleBit, 0.3),
                (InstructionClass::Iadd, ManifestationKind::DoubleBit, 0.3),
            ],
        )
        .unwrap();
        let mut rng = RngStream::new(17);
        let n = 100_000;
        let mut singles = 0u32;
        for _ in 0..n {
            if sample_manifestation(&table, InstructionClass::Iadd, &mut rng).unwrap()
                == ManifestationKind::SingleBit
            {
                singles += 1;
            }
        }
        let freq = singles as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn zero_row_is_an_error() {
        let table = RateTable::from_rows(
            Units::Relative,
            [(InstructionClass::Iadd, ManifestationKind::SingleBit, 0.5)],
        )
        .unwrap();
        let mut rng = RngStream::new(1);
        let err = sample_manifestation(&table, InstructionClass::Bra, &mut rng).unwrap_err();
        assert_eq!(err, CorruptError::EmptyClassRow { class: InstructionClass::Bra });
    }

    #[test]
    fn scaling_rates_preserves_distribution() {
        let rows = [
            (InstructionClass::Iadd, ManifestationKind::SingleBit, 0.54),
            (InstructionClass::Iadd, ManifestationKind::DoubleBit, 0.08),
            (InstructionClass::Iadd, ManifestationKind::RandomValue, 0.08),
        ];
        let base = RateTable::from_rows(Units::Relative, rows).unwrap();
        let scaled = base.calibrate(7.5);
        let mut a = RngStream::new(31);
        let mut b = RngStream::new(31);
        for _ in 0..10_000 {
            assert_eq!(
                sample_manifestation(&base, InstructionClass::Iadd, &mut a).unwrap(),
                sample_manifestation(&scaled, InstructionClass::Iadd, &mut b).unwrap()
            );
        }
    }
}
