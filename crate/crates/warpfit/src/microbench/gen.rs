//! Microbenchmark generators, one per modeled instruction class.
//!
//! Each arithmetic benchmark runs a register series whose destinations are
//! preserved until per-iteration CHK instructions compare an accumulator and
//! the live chain registers against embedded constants; a mismatch dumps
//! every register for post-hoc categorization and exits nonzero. The
//! integer chains use recurrences whose two-register delta map is invertible
//! modulo 2^32, so a corrupted value can never propagate back to clean final
//! registers: every single- or double-bit flip in a series destination is
//! caught by the final-pair checks. Floating-point chains accumulate raw
//! bit patterns with integer adds for the same reason.
//!
//! Expected constants are not hand-maintained: the generator builds the
//! program with placeholder checks, runs it once, and reads the true values
//! out of the resulting register dump before emitting the final program.

use super::layout::{AccumulatorLayout, BranchHop, LayoutManifest, SeriesStep};
use crate::isa::{execute, parse_program, ExecConfig, ExecError, Opcode, ParseError, Program, RunStatus};
use crate::profile::InstructionClass;
use serde::{Deserialize, Serialize};
use thiserror::Error;

// Register plan shared by the generators. Series registers start at R8.
const REG_SEED_A: u8 = 0;
const REG_SEED_B: u8 = 1;
const REG_COUNTER: u8 = 2;
const REG_LIMIT: u8 = 3;
const REG_ACC: u8 = 4;
const REG_ONE: u8 = 5;
const REG_AUX1: u8 = 6;
const REG_AUX2: u8 = 7;
const SERIES_BASE: u8 = 8;
const MAX_SERIES: u32 = 64 - SERIES_BASE as u32;

/// Beyond 23 doubling steps the float values leave the exactly-representable
/// integer range and the chain would start rounding.
const MAX_FFMA_SERIES: u32 = 23;

const PLACEHOLDER: u32 = 0xD15E_A5ED;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrobenchSpec {
    pub target: InstructionClass,
    /// Chain length; packing groups for ISETP; chain hops for BRA.
    pub series_len: u32,
    pub iterations: u32,
    pub warps: u32,
    pub threads_per_warp: u32,
}

impl MicrobenchSpec {
    pub fn new(target: InstructionClass) -> MicrobenchSpec {
        let series_len = match target {
            InstructionClass::Ffma => MAX_FFMA_SERIES,
            InstructionClass::Isetp => 6,
            InstructionClass::Bra => 12,
            _ => 45,
        };
        MicrobenchSpec { target, series_len, iterations: 10, warps: 1, threads_per_warp: 32 }
    }
}

#[derive(Clone, Debug)]
pub struct Microbench {
    pub spec: MicrobenchSpec,
    pub asm: String,
    pub program: Program,
    pub layout: LayoutManifest,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unsupported target class {0}; pick one of the seven modeled classes")]
    UnsupportedTarget(InstructionClass),
    #[error("series length {len} exceeds the register budget (max {max} with {SERIES_BASE} bookkeeping registers)")]
    SeriesTooLong { len: u32, max: u32 },
    #[error("series length {len} too short for target {target}; minimum {min}")]
    SeriesTooShort { len: u32, target: InstructionClass, min: u32 },
    #[error("invalid spec: {0}")]
    BadSpec(String),
    #[error("checking/recording overhead {got:.3} exceeds the 0.10 bound; lengthen the series or loop")]
    OverheadBound { got: f64 },
    #[error("generator self-check failed: {0}")]
    SelfCheck(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

struct AsmBuilder {
    lines: Vec<String>,
    pc: u32,
}

impl AsmBuilder {
    fn new() -> AsmBuilder {
        AsmBuilder { lines: Vec::new(), pc: 0 }
    }

    fn label(&mut self, name: &str) {
        self.lines.push(format!("{name}:"));
    }

    fn instr(&mut self, text: String) -> u32 {
        let at = self.pc;
        self.lines.push(format!("    {text}"));
        self.pc += 1;
        at
    }
}

/// The values each CHK compares against, in emission order (register, value).
type Checks = Vec<(u8, u32)>;

pub fn generate(spec: &MicrobenchSpec) -> Result<Microbench, BenchError> {
    validate_spec(spec)?;
    if spec.target == InstructionClass::Bra {
        return finish(spec, emit_bra(spec));
    }
    let check_regs = check_registers(spec);
    let placeholder: Checks = check_regs.iter().map(|&r| (r, PLACEHOLDER)).collect();
    let (asm1, _) = emit(spec, &placeholder);
    let probe = parse_program(&asm1)?;
    let result = execute(&probe, &ExecConfig::default())?;
    if result.status != RunStatus::Exited(1) || result.records.is_empty() {
        return Err(BenchError::SelfCheck(format!(
            "placeholder run ended {:?} with {} dumps",
            result.status,
            result.records.len()
        )));
    }
    let dump = &result.records[0];
    let checks: Checks = check_regs.iter().map(|&r| (r, dump.regs[0][r as usize])).collect();
    let (asm, mut layout) = emit(spec, &checks);
    for step in &mut layout.steps {
        step.expected = dump.regs[0][step.register as usize];
    }
    if let Some(acc) = &mut layout.accumulator {
        acc.expected = dump.regs[0][acc.register as usize];
    }
    finish(spec, (asm, layout))
}

fn finish(
    spec: &MicrobenchSpec,
    (asm, layout): (String, LayoutManifest),
) -> Result<Microbench, BenchError> {
    let program = parse_program(&asm)?;
    let golden = execute(&program, &ExecConfig::default())?;
    if golden.status != RunStatus::Exited(0) {
        return Err(BenchError::SelfCheck(format!("fault-free run ended {:?}", golden.status)));
    }
    if !golden.records.is_empty() {
        return Err(BenchError::SelfCheck("fault-free run triggered the record buffer".into()));
    }
    let checking: u64 = golden.opcode_count(Opcode::Chk) + golden.opcode_count(Opcode::Record);
    let overhead = checking as f64 / golden.dynamic_count as f64;
    if overhead >= 0.10 {
        return Err(BenchError::OverheadBound { got: overhead });
    }
    Ok(Microbench { spec: spec.clone(), asm, program, layout })
}

fn validate_spec(spec: &MicrobenchSpec) -> Result<(), BenchError> {
    if spec.target == InstructionClass::Uncovered {
        return Err(BenchError::UnsupportedTarget(spec.target));
    }
    if spec.iterations == 0 {
        return Err(BenchError::BadSpec("iterations must be at least 1".into()));
    }
    if spec.warps == 0 || spec.threads_per_warp == 0 {
        return Err(BenchError::BadSpec("warps and threads_per_warp must be at least 1".into()));
    }
    let max = match spec.target {
        InstructionClass::Ffma => MAX_FFMA_SERIES,
        InstructionClass::Bra => 40,
        _ => MAX_SERIES,
    };
    if spec.series_len > max {
        return Err(BenchError::SeriesTooLong { len: spec.series_len, max });
    }
    let min = match spec.target {
        InstructionClass::Bra => 2,
        InstructionClass::Isetp | InstructionClass::Lds => 1,
        _ => 3,
    };
    if spec.series_len < min {
        return Err(BenchError::SeriesTooShort { len: spec.series_len, target: spec.target, min });
    }
    Ok(())
}

fn check_registers(spec: &MicrobenchSpec) -> Vec<u8> {
    let last = SERIES_BASE + spec.series_len as u8 - 1;
    match spec.target {
        InstructionClass::Iadd | InstructionClass::Imad => vec![REG_ACC, last, last - 1],
        InstructionClass::Fadd | InstructionClass::Ffma => vec![REG_ACC, last],
        InstructionClass::Lds => vec![REG_ACC],
        InstructionClass::Isetp => vec![REG_ACC, last],
        InstructionClass::Bra | InstructionClass::Uncovered => unreachable!(),
    }
}

fn kernel_name(target: InstructionClass) -> &'static str {
    match target {
        InstructionClass::Iadd => "iadd_chain",
        InstructionClass::Imad => "imad_chain",
        InstructionClass::Fadd => "fadd_chain",
        InstructionClass::Ffma => "ffma_chain",
        InstructionClass::Lds => "lds_loads",
        InstructionClass::Isetp => "isetp_pack",
        InstructionClass::Bra => "bra_chain",
        InstructionClass::Uncovered => unreachable!(),
    }
}

fn emit(spec: &MicrobenchSpec, checks: &Checks) -> (String, LayoutManifest) {
    match spec.target {
        InstructionClass::Iadd | InstructionClass::Imad => emit_int_chain(spec, checks),
        InstructionClass::Fadd | InstructionClass::Ffma => emit_float_chain(spec, checks),
        InstructionClass::Lds => emit_lds(spec, checks),
        InstructionClass::Isetp => emit_isetp(spec, checks),
        InstructionClass::Bra | InstructionClass::Uncovered => unreachable!(),
    }
}

fn header(spec: &MicrobenchSpec, shmem: u32, output_addr: u32, output_len: u32) -> String {
    format!(
        ".warps {}\n.threads_per_warp {}\n.shmem {}\n.output {} {}\n.kernel {}\n",
        spec.warps,
        spec.threads_per_warp,
        shmem,
        output_addr,
        output_len,
        kernel_name(spec.target)
    )
}

fn emit_checks(b: &mut AsmBuilder, checks: &Checks) {
    for (reg, value) in checks {
        b.instr(format!("CHK R{reg}, 0x{value:08X}"));
    }
}

fn emit_loop_tail(b: &mut AsmBuilder) {
    b.instr(format!("IADD R{REG_COUNTER}, R{REG_COUNTER}, R{REG_ONE}"));
    b.instr(format!("ISETP.LT P0, R{REG_COUNTER}, R{REG_LIMIT}"));
    b.instr("@P0 BRA top".into());
}

/// Integer chains. IADD runs a Fibonacci recurrence; IMAD runs
/// `x_k = 3*x_{k-1} + x_{k-2}` so the multiplier path is exercised. Both
/// recurrences have delta map [[m,1],[1,0]] with determinant -1: invertible
/// modulo 2^32, so the final register pair can never both return to their
/// expected values once a series destination is corrupted.
fn emit_int_chain(spec: &MicrobenchSpec, checks: &Checks) -> (String, LayoutManifest) {
    let n = spec.series_len;
    let imad = spec.target == InstructionClass::Imad;
    let mut b = AsmBuilder::new();
    b.instr(format!("MOVI R{REG_SEED_A}, 1"));
    b.instr(format!("MOVI R{REG_SEED_B}, 1"));
    b.instr(format!("MOVI R{REG_COUNTER}, 0"));
    b.instr(format!("MOVI R{REG_LIMIT}, {}", spec.iterations));
    b.instr(format!("MOVI R{REG_ONE}, 1"));
    if imad {
        b.instr(format!("MOVI R{REG_AUX1}, 1")); // accumulate multiplier
        b.instr(format!("MOVI R{REG_AUX2}, 3")); // chain multiplier
    }
    b.label("top");
    b.instr(format!("MOVI R{REG_ACC}, 0"));
    let mut steps = Vec::new();
    for i in 0..n {
        let dst = SERIES_BASE + i as u8;
        let (prev1, prev2) = match i {
            0 => (REG_SEED_B, REG_SEED_A),
            1 => (SERIES_BASE, REG_SEED_B),
            _ => (dst - 1, dst - 2),
        };
        let pc = if imad {
            b.instr(format!("IMAD R{dst}, R{prev1}, R{REG_AUX2}, R{prev2}"))
        } else {
            b.instr(format!("IADD R{dst}, R{prev1}, R{prev2}"))
        };
        steps.push(SeriesStep {
            index: i + 1,
            register: dst,
            depends_on: match i {
                0 => vec![],
                1 => vec![1],
                _ => vec![i, i - 1],
            },
            expected: 0,
            pcs: vec![pc],
        });
    }
    for i in 0..n {
        let src = SERIES_BASE + i as u8;
        if imad {
            b.instr(format!("IMAD R{REG_ACC}, R{src}, R{REG_AUX1}, R{REG_ACC}"));
        } else {
            b.instr(format!("IADD R{REG_ACC}, R{REG_ACC}, R{src}"));
        }
    }
    emit_checks(&mut b, checks);
    emit_loop_tail(&mut b);
    let last = SERIES_BASE + n as u8 - 1;
    b.instr(format!("STS [0], R{REG_ACC}"));
    b.instr(format!("STS [1], R{last}"));
    b.instr("EXIT".into());

    let layout = LayoutManifest {
        kernel: kernel_name(spec.target).into(),
        target: spec.target,
        steps,
        accumulator: Some(AccumulatorLayout { register: REG_ACC, expected: 0 }),
        checked_registers: checks.iter().map(|(r, _)| *r).collect(),
        loop_counter: Some(REG_COUNTER),
        branch_hops: vec![],
        iterations: spec.iterations,
        notes: vec![],
    };
    (header(spec, 8, 0, 2) + &b.lines.join("\n") + "\n", layout)
}

/// Float chains. FADD走s an arithmetic progression (+1.0 per step), FFMA a
/// doubling recurrence `x_k = 2*x_{k-1} + 1`; both stay on exactly
/// representable small integers, so the expected values carry no rounding.
/// The accumulator adds the raw bit patterns with integer adds: a corrupted
/// series value changes the accumulator even where float rounding would
/// swallow the propagated delta.
fn emit_float_chain(spec: &MicrobenchSpec, checks: &Checks) -> (String, LayoutManifest) {
    let n = spec.series_len;
    let ffma = spec.target == InstructionClass::Ffma;
    let one = 1.0f32.to_bits();
    let two = 2.0f32.to_bits();
    let mut b = AsmBuilder::new();
    b.instr(format!("MOVI R{REG_SEED_A}, 0x{one:08X}")); // 1.0: seed
    b.instr(format!("MOVI R{REG_SEED_B}, 0x{one:08X}")); // 1.0: addend
    b.instr(format!("MOVI R{REG_COUNTER}, 0"));
    b.instr(format!("MOVI R{REG_LIMIT}, {}", spec.iterations));
    b.instr(format!("MOVI R{REG_ONE}, 1"));
    if ffma {
        b.instr(format!("MOVI R{REG_AUX1}, 0x{two:08X}")); // 2.0: multiplier
    }
    b.label("top");
    b.instr(format!("MOVI R{REG_ACC}, 0"));
    let mut steps = Vec::new();
    for i in 0..n {
        let dst = SERIES_BASE + i as u8;
        let prev = if i == 0 { REG_SEED_A } else { dst - 1 };
        let pc = if ffma {
            b.instr(format!("FFMA R{dst}, R{prev}, R{REG_AUX1}, R{REG_SEED_B}"))
        } else {
            b.instr(format!("FADD R{dst}, R{prev}, R{REG_SEED_B}"))
        };
        steps.push(SeriesStep {
            index: i + 1,
            register: dst,
            depends_on: if i == 0 { vec![] } else { vec![i] },
            expected: 0,
            pcs: vec![pc],
        });
    }
    for i in 0..n {
        let src = SERIES_BASE + i as u8;
        b.instr(format!("IADD R{REG_ACC}, R{REG_ACC}, R{src}"));
    }
    emit_checks(&mut b, checks);
    emit_loop_tail(&mut b);
    let last = SERIES_BASE + n as u8 - 1;
    b.instr(format!("STS [0], R{REG_ACC}"));
    b.instr(format!("STS [1], R{last}"));
    b.instr("EXIT".into());

    let layout = LayoutManifest {
        kernel: kernel_name(spec.target).into(),
        target: spec.target,
        steps,
        accumulator: Some(AccumulatorLayout { register: REG_ACC, expected: 0 }),
        checked_registers: checks.iter().map(|(r, _)| *r).collect(),
        loop_counter: Some(REG_COUNTER),
        branch_hops: vec![],
        iterations: spec.iterations,
        notes: vec![],
    };
    (header(spec, 8, 0, 2) + &b.lines.join("\n") + "\n", layout)
}

/// Shared-memory loads: known patterns are stored once, then each iteration
/// loads every word into its own register and integer-adds them into the
/// accumulator, so a corrupted load is distinguishable from a corrupted add:
/// the add corrupts only the accumulator, never the load's register.
fn emit_lds(spec: &MicrobenchSpec, checks: &Checks) -> (String, LayoutManifest) {
    let n = spec.series_len;
    let mut b = AsmBuilder::new();
    b.instr(format!("MOVI R{REG_COUNTER}, 0"));
    b.instr(format!("MOVI R{REG_LIMIT}, {}", spec.iterations));
    b.instr(format!("MOVI R{REG_ONE}, 1"));
    for j in 0..n {
        // Distinct per-word patterns so cross-address mixups are visible.
        let value = 0x0001_0000u32 + j * 0x0101;
        b.instr(format!("MOVI R{REG_AUX1}, 0x{value:08X}"));
        b.instr(format!("STS [{j}], R{REG_AUX1}"));
    }
    b.label("top");
    b.instr(format!("MOVI R{REG_ACC}, 0"));
    let mut steps = Vec::new();
    for j in 0..n {
        let dst = SERIES_BASE + j as u8;
        let pc = b.instr(format!("LDS R{dst}, [{j}]"));
        steps.push(SeriesStep {
            index: j + 1,
            register: dst,
            depends_on: vec![],
            expected: 0,
            pcs: vec![pc],
        });
    }
    for j in 0..n {
        let src = SERIES_BASE + j as u8;
        b.instr(format!("IADD R{REG_ACC}, R{REG_ACC}, R{src}"));
    }
    emit_checks(&mut b, checks);
    emit_loop_tail(&mut b);
    b.instr(format!("STS [{n}], R{REG_ACC}"));
    b.instr("EXIT".into());

    let layout = LayoutManifest {
        kernel: kernel_name(spec.target).into(),
        target: spec.target,
        steps,
        accumulator: Some(AccumulatorLayout { register: REG_ACC, expected: 0 }),
        checked_registers: checks.iter().map(|(r, _)| *r).collect(),
        loop_counter: Some(REG_COUNTER),
        branch_hops: vec![],
        iterations: spec.iterations,
        notes: vec![
            "loads and accumulate-adds are distinguishable: an add corrupts only the accumulator"
                .into(),
        ],
    };
    (header(spec, n + 8, n, 2) + &b.lines.join("\n") + "\n", layout)
}

/// Predicate groups: seven back-to-back compares writing P0..P6 followed by
/// a pack into a general register, repeated `series_len` times per
/// iteration. A flipped predicate surfaces as the matching bit of the
/// group's packed register. The pack register is the observation point, so
/// an error in the pack instruction is indistinguishable from an error in
/// the compare that fed it; the manifest records that aliasing.
fn emit_isetp(spec: &MicrobenchSpec, checks: &Checks) -> (String, LayoutManifest) {
    let groups = spec.series_len;
    let cmps = ["GT", "LT", "GE", "LE", "NE", "EQ", "GT"];
    let mut b = AsmBuilder::new();
    b.instr(format!("MOVI R{REG_SEED_A}, 5"));
    b.instr(format!("MOVI R{REG_SEED_B}, 3"));
    b.instr(format!("MOVI R{REG_COUNTER}, 0"));
    b.instr(format!("MOVI R{REG_LIMIT}, {}", spec.iterations));
    b.instr(format!("MOVI R{REG_ONE}, 1"));
    b.label("top");
    b.instr(format!("MOVI R{REG_ACC}, 0"));
    let mut steps = Vec::new();
    for g in 0..groups {
        let dst = SERIES_BASE + g as u8;
        let mut pcs = Vec::with_capacity(8);
        for (p, cmp) in cmps.iter().enumerate() {
            pcs.push(b.instr(format!("ISETP.{cmp} P{p}, R{REG_SEED_A}, R{REG_SEED_B}")));
        }
        pcs.push(b.instr(format!("P2R R{dst}")));
        b.instr(format!("IADD R{REG_ACC}, R{REG_ACC}, R{dst}"));
        steps.push(SeriesStep {
            index: g + 1,
            register: dst,
            depends_on: vec![],
            expected: 0,
            pcs,
        });
    }
    emit_checks(&mut b, checks);
    emit_loop_tail(&mut b);
    let last = SERIES_BASE + groups as u8 - 1;
    b.instr(format!("STS [0], R{REG_ACC}"));
    b.instr(format!("STS [1], R{last}"));
    b.instr("EXIT".into());

    let layout = LayoutManifest {
        kernel: kernel_name(spec.target).into(),
        target: spec.target,
        steps,
        accumulator: Some(AccumulatorLayout { register: REG_ACC, expected: 0 }),
        checked_registers: checks.iter().map(|(r, _)| *r).collect(),
        loop_counter: Some(REG_COUNTER),
        branch_hops: vec![],
        iterations: spec.iterations,
        notes: vec![
            "origin granularity is the pack group: an error in the pack instruction is \
             attributed to its compares"
                .into(),
        ],
    };
    (header(spec, 8, 0, 2) + &b.lines.join("\n") + "\n", layout)
}

/// Branch chain: each chain branch targets the next chain branch, hopping
/// over filler branches that jump to a record routine and terminate the
/// program with the loop index preserved in the dump. A retargeted chain
/// branch either lands on a filler (early termination, logged) or leaves the
/// kernel (illegal-instruction fault).
fn emit_bra(spec: &MicrobenchSpec) -> (String, LayoutManifest) {
    let hops = spec.series_len;
    let mut b = AsmBuilder::new();
    b.instr(format!("MOVI R{REG_COUNTER}, 0"));
    b.instr(format!("MOVI R{REG_LIMIT}, {}", spec.iterations));
    b.instr(format!("MOVI R{REG_ONE}, 1"));
    let mut branch_hops = Vec::new();
    b.label("top");
    for h in 0..hops {
        let target = if h + 1 == hops { "tail".to_string() } else { format!("c{}", h + 1) };
        if h > 0 {
            b.label(&format!("c{h}"));
        }
        let chain_pc = b.instr(format!("BRA {target}"));
        let filler_pc = b.instr("BRA rec".into());
        b.instr("BRA rec".into());
        branch_hops.push(BranchHop { chain_pc, filler_pc });
    }
    b.label("tail");
    b.instr(format!("IADD R{REG_COUNTER}, R{REG_COUNTER}, R{REG_ONE}"));
    b.instr(format!("ISETP.LT P0, R{REG_COUNTER}, R{REG_LIMIT}"));
    b.instr("@P0 BRA top".into());
    b.instr(format!("CHK R{REG_COUNTER}, {}", spec.iterations));
    b.instr(format!("STS [0], R{REG_COUNTER}"));
    b.instr("EXIT".into());
    b.label("rec");
    b.instr("RECORD".into());
    b.instr("EXIT 1".into());

    let layout = LayoutManifest {
        kernel: kernel_name(spec.target).into(),
        target: spec.target,
        steps: vec![],
        accumulator: None,
        checked_registers: vec![REG_COUNTER],
        loop_counter: Some(REG_COUNTER),
        branch_hops,
        iterations: spec.iterations,
        notes: vec![
            "detection is by early termination (record routine logs the loop counter) or fault"
                .into(),
        ],
    };
    (header(spec, 8, 0, 1) + &b.lines.join("\n") + "\n", layout)
}

/// Reference series values, used by tests to cross-check the constants the
/// generator extracted through the interpreter.
pub fn reference_series(target: InstructionClass, len: u32) -> Vec<u32> {
    match target {
        InstructionClass::Iadd => {
            let mut v: Vec<u32> = vec![];
            let (mut a, mut b) = (1u32, 1u32);
            for _ in 0..len {
                let next = b.wrapping_add(a);
                v.push(next);
                a = b;
                b = next;
            }
            v
        }
        InstructionClass::Imad => {
            let mut v: Vec<u32> = vec![];
            let (mut a, mut b) = (1u32, 1u32);
            for _ in 0..len {
                let next = b.wrapping_mul(3).wrapping_add(a);
                v.push(next);
                a = b;
                b = next;
            }
            v
        }
        InstructionClass::Fadd => (0..len).map(|i| (i as f32 + 2.0).to_bits()).collect(),
        InstructionClass::Ffma => {
            let mut v = vec![];
            let mut x = 1.0f32;
            for _ in 0..len {
                x = x.mul_add(2.0, 1.0);
                v.push(x.to_bits());
            }
            v
        }
        InstructionClass::Lds => (0..len).map(|j| 0x0001_0000u32 + j * 0x0101).collect(),
        InstructionClass::Isetp => {
            // GT LT GE LE NE EQ GT on (5, 3) packs to 0b1010101.
            (0..len).map(|_| 0b101_0101u32).collect()
        }
        InstructionClass::Bra | InstructionClass::Uncovered => vec![],
    }
}

/// The matching accumulator reference: wrapping sum of the series values.
pub fn reference_accumulator(target: InstructionClass, len: u32) -> u32 {
    reference_series(target, len).iter().fold(0u32, |acc, v| acc.wrapping_add(*v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{profile, MODELED_CLASSES};

    #[test]
    fn every_class_generates_a_clean_benchmark() {
        for target in MODELED_CLASSES {
            let spec = MicrobenchSpec::new(target);
            let bench = generate(&spec).unwrap_or_else(|e| panic!("{target}: {e}"));
            // generate() already asserts Exited(0) and an empty record
            // buffer; confirm the layout landed.
            if target != InstructionClass::Bra {
                assert!(!bench.layout.steps.is_empty(), "{target}");
            } else {
                assert_eq!(bench.layout.branch_hops.len(), 12);
            }
        }
    }

    #[test]
    fn iadd_constants_match_wrapping_fibonacci() {
        let spec = MicrobenchSpec { iterations: 2, ..MicrobenchSpec::new(InstructionClass::Iadd) };
        let bench = generate(&spec).unwrap();
        let reference = reference_series(InstructionClass::Iadd, spec.series_len);
        for (step, expected) in bench.layout.steps.iter().zip(&reference) {
            assert_eq!(step.expected, *expected, "step {}", step.index);
        }
        assert_eq!(
            bench.layout.accumulator.as_ref().unwrap().expected,
            reference_accumulator(InstructionClass::Iadd, spec.series_len)
        );
    }

    #[test]
    fn imad_constants_match_wrapping_recurrence() {
        let spec = MicrobenchSpec { iterations: 2, ..MicrobenchSpec::new(InstructionClass::Imad) };
        let bench = generate(&spec).unwrap();
        let reference = reference_series(InstructionClass::Imad, spec.series_len);
        for (step, expected) in bench.layout.steps.iter().zip(&reference) {
            assert_eq!(step.expected, *expected, "step {}", step.index);
        }
    }

    #[test]
    fn fadd_constants_are_exact_float_integers() {
        let spec = MicrobenchSpec { iterations: 2, ..MicrobenchSpec::new(InstructionClass::Fadd) };
        let bench = generate(&spec).unwrap();
        let reference = reference_series(InstructionClass::Fadd, spec.series_len);
        for (step, expected) in bench.layout.steps.iter().zip(&reference) {
            assert_eq!(step.expected, *expected, "step {}", step.index);
        }
        // Last value is 46.0: small integers in float, no rounding.
        assert_eq!(bench.layout.steps.last().unwrap().expected, 46.0f32.to_bits());
    }

    #[test]
    fn ffma_constants_are_mersenne_like() {
        let spec = MicrobenchSpec { iterations: 2, ..MicrobenchSpec::new(InstructionClass::Ffma) };
        let bench = generate(&spec).unwrap();
        let reference = reference_series(InstructionClass::Ffma, spec.series_len);
        for (step, expected) in bench.layout.steps.iter().zip(&reference) {
            assert_eq!(step.expected, *expected, "step {}", step.index);
        }
        let last = f32::from_bits(bench.layout.steps.last().unwrap().expected);
        assert_eq!(last, (1u32 << 24) as f32 - 1.0);
    }

    #[test]
    fn lds_constants_match_stored_patterns() {
        let spec = MicrobenchSpec { iterations: 2, ..MicrobenchSpec::new(InstructionClass::Lds) };
        let bench = generate(&spec).unwrap();
        let reference = reference_series(InstructionClass::Lds, spec.series_len);
        for (step, expected) in bench.layout.steps.iter().zip(&reference) {
            assert_eq!(step.expected, *expected);
        }
    }

    #[test]
    fn isetp_groups_pack_alternating_bits() {
        let spec = MicrobenchSpec { iterations: 2, ..MicrobenchSpec::new(InstructionClass::Isetp) };
        let bench = generate(&spec).unwrap();
        for step in &bench.layout.steps {
            assert_eq!(step.expected, 0b101_0101);
            assert_eq!(step.pcs.len(), 8, "seven compares and one pack");
        }
        // Structure: the seven compares write distinct predicates.
        let k = &bench.program.kernels[0];
        let g0 = &bench.layout.steps[0].pcs;
        for (i, pc) in g0[..7].iter().enumerate() {
            let instr = &k.instructions[*pc as usize];
            assert_eq!(instr.opcode, Opcode::Isetp);
            assert_eq!(instr.dest, Some(crate::isa::Dest::Pred(i as u8)));
        }
        assert_eq!(k.instructions[g0[7] as usize].opcode, Opcode::P2r);
    }

    #[test]
    fn bra_bench_completes_all_iterations_without_logging() {
        let spec = MicrobenchSpec { iterations: 5, ..MicrobenchSpec::new(InstructionClass::Bra) };
        let bench = generate(&spec).unwrap();
        let result = execute(&bench.program, &ExecConfig::default()).unwrap();
        assert_eq!(result.status, RunStatus::Exited(0));
        assert!(result.records.is_empty());
        assert_eq!(result.output, vec![5]);
    }

    #[test]
    fn overhead_stays_under_ten_percent() {
        for target in MODELED_CLASSES {
            let bench = generate(&MicrobenchSpec::new(target)).unwrap();
            let prof = profile(&bench.program).unwrap();
            let checking = prof
                .opcode_counts
                .iter()
                .filter(|(op, _)| matches!(op, Opcode::Chk | Opcode::Record))
                .map(|(_, n)| *n)
                .sum::<u64>();
            let fraction = checking as f64 / prof.total_instructions as f64;
            assert!(fraction < 0.10, "{target}: checking fraction {fraction}");
        }
    }

    #[test]
    fn series_budget_is_enforced() {
        let spec = MicrobenchSpec { series_len: 57, ..MicrobenchSpec::new(InstructionClass::Iadd) };
        assert!(matches!(generate(&spec), Err(BenchError::SeriesTooLong { .. })));
        let spec = MicrobenchSpec { series_len: 24, ..MicrobenchSpec::new(InstructionClass::Ffma) };
        assert!(matches!(generate(&spec), Err(BenchError::SeriesTooLong { max: 23, .. })));
    }

    #[test]
    fn uncovered_target_is_rejected() {
        let spec = MicrobenchSpec::new(InstructionClass::Iadd);
        let spec = MicrobenchSpec { target: InstructionClass::Uncovered, ..spec };
        assert!(matches!(generate(&spec), Err(BenchError::UnsupportedTarget(_))));
    }
}
