//! Warp-synchronous interpreter with deterministic round-robin scheduling,
//! an instruction budget for hang detection, and a post-write hook that is
//! the single entry point for state corruption.
//!
//! All threads of a warp share one program counter. A predicated branch with
//! a mixed outcome serializes the two mask-partitioned paths and reconverges
//! at the kernel's declared `.reconv` point. Integer arithmetic wraps;
//! floating point is 32-bit with round-to-nearest-even. The interpreter
//! itself contains no fault logic: corruption happens only through the hook.

use super::types::{Dest, Instruction, Kernel, Opcode, Operand, Program};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug)]
pub struct ExecConfig {
    /// Hard cap on issued instructions; exceeding it ends the run as a Hang.
    pub budget: u64,
    /// Instructions the scheduler may issue per cycle (at most one per warp).
    pub issue_slots: u32,
    /// Record-buffer entries kept before further dumps are dropped.
    pub max_records: u32,
    /// Byte cap on the stdout analog.
    pub max_stdout: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig { budget: 10_000_000, issue_slots: 1, max_records: 4096, max_stdout: 1 << 20 }
    }
}

impl ExecConfig {
    pub fn with_budget(budget: u64) -> Self {
        ExecConfig { budget, ..ExecConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultKind {
    IllegalInstruction,
    OutOfRangeAddress,
    /// Reserved fault class for call/return stack damage. The mini-ISA has
    /// no stack, so the interpreter never raises it; it exists so that
    /// attribution tables cover the full fault taxonomy.
    StackError,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RunStatus {
    Exited(u32),
    Hang,
    Fault(FaultKind),
}

impl RunStatus {
    pub fn is_exited(&self) -> bool {
        matches!(self, RunStatus::Exited(_))
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("kernel `{kernel}` pc {pc}: divergent branch without a .reconv declaration")]
    DivergenceWithoutReconv { kernel: String, pc: usize },
    #[error("invalid execution config: {0}")]
    BadConfig(String),
}

/// Why a register dump was taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordReason {
    /// A CHK comparison failed.
    Check,
    /// An explicit RECORD instruction.
    Explicit,
}

/// Snapshot of one warp's registers, written by RECORD or a failed CHK.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub kernel: String,
    pub pc: usize,
    pub warp: u32,
    pub reason: RecordReason,
    pub active_mask: u64,
    /// Per-thread general registers, `regs[thread][reg]`.
    pub regs: Vec<Vec<u32>>,
    /// Per-thread predicate bits packed into the low 7 bits.
    pub preds: Vec<u8>,
}

/// Mutable data planes of a run: registers, predicates, shared memory, and
/// the observation channels (record buffer and stdout analog). The hook may
/// mutate registers and predicates; everything else is interpreter-owned.
#[derive(Clone, Debug)]
pub struct MachineState {
    warps: u32,
    tpw: u32,
    regs: Vec<u32>,
    preds: Vec<u8>,
    shmem: Vec<u32>,
    stdout: String,
    stdout_truncated: bool,
    records: Vec<RecordEntry>,
    records_dropped: u64,
    max_records: u32,
    max_stdout: usize,
}

impl MachineState {
    fn new(warps: u32, tpw: u32, shmem_words: u32, cfg: &ExecConfig) -> Self {
        MachineState {
            warps,
            tpw,
            regs: vec![0; warps as usize * tpw as usize * 64],
            preds: vec![0; warps as usize * tpw as usize],
            shmem: vec![0; shmem_words as usize],
            stdout: String::new(),
            stdout_truncated: false,
            records: Vec::new(),
            records_dropped: 0,
            max_records: cfg.max_records,
            max_stdout: cfg.max_stdout,
        }
    }

    fn reset_thread_state(&mut self) {
        self.regs.fill(0);
        self.preds.fill(0);
    }

    pub fn warp_count(&self) -> u32 {
        self.warps
    }

    pub fn threads_per_warp(&self) -> u32 {
        self.tpw
    }

    #[inline]
    fn reg_index(&self, warp: u32, thread: u32, reg: u8) -> usize {
        debug_assert!(warp < self.warps && thread < self.tpw && reg < 64);
        (warp as usize * self.tpw as usize + thread as usize) * 64 + reg as usize
    }

    pub fn reg(&self, warp: u32, thread: u32, reg: u8) -> u32 {
        self.regs[self.reg_index(warp, thread, reg)]
    }

    pub fn set_reg(&mut self, warp: u32, thread: u32, reg: u8, value: u32) {
        let idx = self.reg_index(warp, thread, reg);
        self.regs[idx] = value;
    }

    pub fn xor_reg(&mut self, warp: u32, thread: u32, reg: u8, mask: u32) {
        let idx = self.reg_index(warp, thread, reg);
        self.regs[idx] ^= mask;
    }

    pub fn pred(&self, warp: u32, thread: u32, pred: u8) -> bool {
        debug_assert!(pred < 7);
        let idx = warp as usize * self.tpw as usize + thread as usize;
        self.preds[idx] >> pred & 1 == 1
    }

    pub fn set_pred(&mut self, warp: u32, thread: u32, pred: u8, value: bool) {
        debug_assert!(pred < 7);
        let idx = warp as usize * self.tpw as usize + thread as usize;
        if value {
            self.preds[idx] |= 1 << pred;
        } else {
            self.preds[idx] &= !(1 << pred);
        }
    }

    pub fn shmem(&self) -> &[u32] {
        &self.shmem
    }

    fn print(&mut self, line: &str) {
        if self.stdout.len() + line.len() > self.max_stdout {
            if !self.stdout_truncated {
                self.stdout.push_str("[stdout truncated]\n");
                self.stdout_truncated = true;
            }
            return;
        }
        self.stdout.push_str(line);
    }

    fn dump_warp(&mut self, kernel: &str, pc: usize, warp: u32, reason: RecordReason, mask: u64) {
        if self.records.len() as u32 >= self.max_records {
            self.records_dropped += 1;
            return;
        }
        let tpw = self.tpw;
        let mut regs = Vec::with_capacity(tpw as usize);
        let mut preds = Vec::with_capacity(tpw as usize);
        for t in 0..tpw {
            let base = self.reg_index(warp, t, 0);
            regs.push(self.regs[base..base + 64].to_vec());
            preds.push(self.preds[warp as usize * tpw as usize + t as usize]);
        }
        self.records.push(RecordEntry {
            kernel: kernel.to_string(),
            pc,
            warp,
            reason,
            active_mask: mask,
            regs,
            preds,
        });
    }
}

/// Event passed to the injector hook after an instruction writes its
/// destination. `write_mask` holds the threads that actually wrote (the
/// active mask intersected with the guard).
#[derive(Clone, Copy, Debug)]
pub struct WriteEvent {
    pub kernel_index: u32,
    pub pc: usize,
    pub warp: u32,
    pub opcode: Opcode,
    pub dest: Dest,
    pub write_mask: u64,
    /// Ordinal of this instruction in the global dynamic stream (0-based).
    pub global_index: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelStats {
    pub name: String,
    pub dynamic_count: u64,
    pub opcode_counts: Vec<(Opcode, u64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub status: RunStatus,
    /// Words of the declared output region at end of run.
    pub output: Vec<u32>,
    pub records: Vec<RecordEntry>,
    pub records_dropped: u64,
    pub stdout: String,
    pub dynamic_count: u64,
    pub opcode_counts: Vec<(Opcode, u64)>,
    pub kernel_stats: Vec<KernelStats>,
    /// Scheduler cycles consumed (at most `issue_slots` issues per cycle).
    pub cycles: u64,
}

impl RunResult {
    pub fn opcode_count(&self, op: Opcode) -> u64 {
        self.opcode_counts.iter().find(|(o, _)| *o == op).map(|(_, n)| *n).unwrap_or(0)
    }
}

pub fn execute(program: &Program, cfg: &ExecConfig) -> Result<RunResult, ExecError> {
    execute_with_hook(program, cfg, |_, _| {})
}

pub fn execute_with_hook<H>(
    program: &Program,
    cfg: &ExecConfig,
    hook: H,
) -> Result<RunResult, ExecError>
where
    H: FnMut(&mut MachineState, &WriteEvent),
{
    if cfg.budget == 0 {
        return Err(ExecError::BadConfig("instruction budget must be positive".into()));
    }
    if cfg.issue_slots == 0 {
        return Err(ExecError::BadConfig("issue slots must be positive".into()));
    }
    Executor::new(program, cfg, hook).run()
}

#[derive(Clone, Copy, Debug)]
struct PathFrame {
    mask: u64,
    pc: usize,
}

struct WarpCtx {
    pc: usize,
    active: u64,
    pending: Vec<PathFrame>,
    arrived: u64,
    exit_code: u32,
    done: bool,
}

impl WarpCtx {
    fn fresh(mask: u64) -> Self {
        WarpCtx { pc: 0, active: mask, pending: Vec::new(), arrived: 0, exit_code: 0, done: false }
    }
}

enum Step {
    Issued,
    Fault(FaultKind),
}

struct Executor<'p, H> {
    program: &'p Program,
    cfg: &'p ExecConfig,
    hook: H,
    state: MachineState,
    warps: Vec<WarpCtx>,
    kernel_index: usize,
    executed: u64,
    cycles: u64,
    opcode_counts: [u64; Opcode::ALL.len()],
    kernel_opcode_counts: [u64; Opcode::ALL.len()],
    kernel_stats: Vec<KernelStats>,
}

impl<'p, H> Executor<'p, H>
where
    H: FnMut(&mut MachineState, &WriteEvent),
{
    fn new(program: &'p Program, cfg: &'p ExecConfig, hook: H) -> Self {
        let state = MachineState::new(program.warps, program.threads_per_warp, program.shmem_words, cfg);
        Executor {
            program,
            cfg,
            hook,
            state,
            warps: Vec::new(),
            kernel_index: 0,
            executed: 0,
            cycles: 0,
            opcode_counts: [0; Opcode::ALL.len()],
            kernel_opcode_counts: [0; Opcode::ALL.len()],
            kernel_stats: Vec::new(),
        }
    }

    fn full_mask(&self) -> u64 {
        let tpw = self.program.threads_per_warp;
        if tpw == 64 {
            u64::MAX
        } else {
            (1u64 << tpw) - 1
        }
    }

    fn run(mut self) -> Result<RunResult, ExecError> {
        let mut final_status: Option<RunStatus> = None;
        let mut max_exit = 0u32;
        'kernels: for ki in 0..self.program.kernels.len() {
            self.kernel_index = ki;
            self.kernel_opcode_counts = [0; Opcode::ALL.len()];
            // Each kernel launch starts from zeroed registers and predicates;
            // shared memory persists across kernels.
            self.state.reset_thread_state();
            let mask = self.full_mask();
            self.warps = (0..self.program.warps).map(|_| WarpCtx::fresh(mask)).collect();

            let mut rr_start = 0usize;
            loop {
                let live = self.warps.iter().filter(|w| !w.done).count();
                if live == 0 {
                    break;
                }
                let mut issued = 0u32;
                let n = self.warps.len();
                for i in 0..n {
                    let w = (rr_start + i) % n;
                    if self.warps[w].done {
                        continue;
                    }
                    // Path switching and retirement are bookkeeping, not
                    // issued instructions.
                    if !self.resolve_warp(w) {
                        continue;
                    }
                    if issued == self.cfg.issue_slots {
                        continue;
                    }
                    if self.executed == self.cfg.budget {
                        final_status = Some(RunStatus::Hang);
                        break 'kernels;
                    }
                    match self.issue(w)? {
                        Step::Issued => issued += 1,
                        Step::Fault(kind) => {
                            final_status = Some(RunStatus::Fault(kind));
                            break 'kernels;
                        }
                    }
                }
                if issued > 0 {
                    self.cycles += 1;
                }
                rr_start = (rr_start + 1) % n;
            }
            self.flush_kernel_stats(ki);
            for w in &self.warps {
                max_exit = max_exit.max(w.exit_code);
            }
        }
        if final_status.is_some() {
            self.flush_kernel_stats(self.kernel_index);
        }
        let status = final_status.unwrap_or(RunStatus::Exited(max_exit));
        Ok(self.finish(status))
    }

    fn flush_kernel_stats(&mut self, ki: usize) {
        let counts: Vec<(Opcode, u64)> = Opcode::ALL
            .iter()
            .map(|&op| (op, self.kernel_opcode_counts[op.index()]))
            .filter(|(_, n)| *n > 0)
            .collect();
        let dynamic: u64 = counts.iter().map(|(_, n)| n).sum();
        self.kernel_stats.push(KernelStats {
            name: self.program.kernels[ki].name.clone(),
            dynamic_count: dynamic,
            opcode_counts: counts,
        });
    }

    fn finish(self, status: RunStatus) -> RunResult {
        let output = match self.program.output {
            Some(region) => {
                let lo = region.addr as usize;
                let hi = lo + region.len as usize;
                self.state.shmem[lo..hi].to_vec()
            }
            None => Vec::new(),
        };
        let opcode_counts: Vec<(Opcode, u64)> = Opcode::ALL
            .iter()
            .map(|&op| (op, self.opcode_counts[op.index()]))
            .filter(|(_, n)| *n > 0)
            .collect();
        RunResult {
            status,
            output,
            records: self.state.records,
            records_dropped: self.state.records_dropped,
            stdout: self.state.stdout,
            dynamic_count: self.executed,
            opcode_counts,
            kernel_stats: self.kernel_stats,
            cycles: self.cycles,
        }
    }

    /// Resolve parking, path switching, and retirement for a warp. Returns
    /// true when the warp has an instruction ready to issue.
    fn resolve_warp(&mut self, w: usize) -> bool {
        let reconv = self.program.kernels[self.kernel_index].reconv;
        loop {
            let ctx = &mut self.warps[w];
            if ctx.active == 0 {
                if let Some(frame) = ctx.pending.pop() {
                    ctx.active = frame.mask;
                    ctx.pc = frame.pc;
                    continue;
                }
                if ctx.arrived != 0 {
                    ctx.active = ctx.arrived;
                    ctx.arrived = 0;
                    ctx.pc = reconv.expect("arrived mask implies a reconv point");
                    continue;
                }
                ctx.done = true;
                return false;
            }
            // Park at the reconvergence point while sibling paths remain.
            if reconv == Some(ctx.pc) && (!ctx.pending.is_empty() || ctx.arrived != 0) {
                ctx.arrived |= ctx.active;
                ctx.active = 0;
                continue;
            }
            return true;
        }
    }

    fn issue(&mut self, w: usize) -> Result<Step, ExecError> {
        let program = self.program;
        let kernel: &Kernel = &program.kernels[self.kernel_index];
        let pc = self.warps[w].pc;
        debug_assert!(pc < kernel.instructions.len());
        let instr = &kernel.instructions[pc];

        self.executed += 1;
        self.opcode_counts[instr.opcode.index()] += 1;
        self.kernel_opcode_counts[instr.opcode.index()] += 1;
        let global_index = self.executed - 1;

        let active = self.warps[w].active;
        let enabled = match instr.guard {
            Some(g) => {
                let mut m = 0u64;
                for t in iter_mask(active) {
                    if self.state.pred(w as u32, t, g.pred) == g.expect {
                        m |= 1 << t;
                    }
                }
                m
            }
            None => active,
        };

        let mut advance = true;
        match instr.opcode {
            Opcode::Iadd => {
                for t in iter_mask(enabled) {
                    let a = self.read(w, t, &instr.srcs[0]);
                    let b = self.read(w, t, &instr.srcs[1]);
                    self.write_gpr(w, t, instr, a.wrapping_add(b));
                }
            }
            Opcode::Imad => {
                for t in iter_mask(enabled) {
                    let a = self.read(w, t, &instr.srcs[0]);
                    let b = self.read(w, t, &instr.srcs[1]);
                    let c = self.read(w, t, &instr.srcs[2]);
                    self.write_gpr(w, t, instr, a.wrapping_mul(b).wrapping_add(c));
                }
            }
            Opcode::Fadd => {
                for t in iter_mask(enabled) {
                    let a = f32::from_bits(self.read(w, t, &instr.srcs[0]));
                    let b = f32::from_bits(self.read(w, t, &instr.srcs[1]));
                    self.write_gpr(w, t, instr, (a + b).to_bits());
                }
            }
            Opcode::Ffma => {
                for t in iter_mask(enabled) {
                    let a = f32::from_bits(self.read(w, t, &instr.srcs[0]));
                    let b = f32::from_bits(self.read(w, t, &instr.srcs[1]));
                    let c = f32::from_bits(self.read(w, t, &instr.srcs[2]));
                    self.write_gpr(w, t, instr, a.mul_add(b, c).to_bits());
                }
            }
            Opcode::Mov | Opcode::Movi => {
                for t in iter_mask(enabled) {
                    let v = self.read(w, t, &instr.srcs[0]);
                    self.write_gpr(w, t, instr, v);
                }
            }
            Opcode::Lds => {
                for t in iter_mask(enabled) {
                    let addr = self.read(w, t, instr.addr.as_ref().unwrap());
                    if addr as usize >= self.state.shmem.len() {
                        return Ok(Step::Fault(FaultKind::OutOfRangeAddress));
                    }
                    let v = self.state.shmem[addr as usize];
                    self.write_gpr(w, t, instr, v);
                }
            }
            Opcode::Sts => {
                // Threads store in ascending order; on address collisions the
                // highest thread index wins.
                for t in iter_mask(enabled) {
                    let addr = self.read(w, t, instr.addr.as_ref().unwrap());
                    if addr as usize >= self.state.shmem.len() {
                        return Ok(Step::Fault(FaultKind::OutOfRangeAddress));
                    }
                    let v = self.read(w, t, &instr.srcs[0]);
                    self.state.shmem[addr as usize] = v;
                }
            }
            Opcode::Isetp => {
                let Dest::Pred(p) = instr.dest.unwrap() else { unreachable!() };
                for t in iter_mask(enabled) {
                    let a = self.read(w, t, &instr.srcs[0]) as i32;
                    let b = self.read(w, t, &instr.srcs[1]) as i32;
                    let v = instr.cmp.unwrap().eval(a, b);
                    self.state.set_pred(w as u32, t, p, v);
                }
                self.fire_hook(w, pc, instr, enabled, global_index);
            }
            Opcode::P2r => {
                for t in iter_mask(enabled) {
                    let mut v = 0u32;
                    for p in 0..7u8 {
                        if self.state.pred(w as u32, t, p) {
                            v |= 1 << p;
                        }
                    }
                    self.write_gpr(w, t, instr, v);
                }
            }
            Opcode::Bra => {
                let target = instr.target.unwrap();
                let kernel_len = kernel.instructions.len();
                let ctx = &mut self.warps[w];
                if enabled == ctx.active {
                    if target >= kernel_len {
                        return Ok(Step::Fault(FaultKind::IllegalInstruction));
                    }
                    ctx.pc = target;
                    advance = false;
                } else if enabled == 0 {
                    // Uniformly not taken.
                } else {
                    // Divergence: run the fall-through path first, queue the
                    // taken path, reconverge at the declared point.
                    if kernel.reconv.is_none() {
                        return Err(ExecError::DivergenceWithoutReconv {
                            kernel: kernel.name.clone(),
                            pc,
                        });
                    }
                    if target >= kernel_len {
                        return Ok(Step::Fault(FaultKind::IllegalInstruction));
                    }
                    let taken = enabled;
                    let fallthrough = ctx.active & !enabled;
                    ctx.pending.push(PathFrame { mask: taken, pc: target });
                    ctx.active = fallthrough;
                }
            }
            Opcode::Chk => {
                let kernel_name = kernel.name.clone();
                for t in iter_mask(enabled) {
                    let got = self.read(w, t, &instr.srcs[0]);
                    let expected = self.read(w, t, &instr.srcs[1]);
                    if got != expected {
                        self.state.print(&format!(
                            "CHK mismatch: kernel={kernel_name} pc={pc} warp={w} thread={t} expected=0x{expected:08X} got=0x{got:08X}\n"
                        ));
                        let mask = self.warps[w].active;
                        self.state.dump_warp(&kernel_name, pc, w as u32, RecordReason::Check, mask);
                        let ctx = &mut self.warps[w];
                        ctx.exit_code = ctx.exit_code.max(1);
                        ctx.active = 0;
                        ctx.pending.clear();
                        ctx.arrived = 0;
                        advance = false;
                        break;
                    }
                }
            }
            Opcode::Record => {
                let kernel_name = kernel.name.clone();
                self.state.print(&format!("RECORD: kernel={kernel_name} pc={pc} warp={w}\n"));
                let mask = self.warps[w].active;
                self.state.dump_warp(&kernel_name, pc, w as u32, RecordReason::Explicit, mask);
            }
            Opcode::Exit => {
                let code = match instr.srcs.first() {
                    Some(Operand::Imm(v)) => *v,
                    _ => 0,
                };
                if code != 0 {
                    let kernel_name = &kernel.name;
                    self.state.print(&format!("exit: kernel={kernel_name} warp={w} code={code}\n"));
                }
                let ctx = &mut self.warps[w];
                if enabled == ctx.active {
                    ctx.exit_code = ctx.exit_code.max(code);
                    ctx.active = 0;
                    advance = false;
                } else {
                    // Partial exit under a guard: retire just those threads.
                    ctx.exit_code = ctx.exit_code.max(code);
                    ctx.active &= !enabled;
                    if ctx.active == 0 {
                        advance = false;
                    }
                }
            }
        }

        // Register-writing opcodes report to the hook after the write.
        match instr.opcode {
            Opcode::Iadd
            | Opcode::Imad
            | Opcode::Fadd
            | Opcode::Ffma
            | Opcode::Mov
            | Opcode::Movi
            | Opcode::Lds
            | Opcode::P2r => self.fire_hook(w, pc, instr, enabled, global_index),
            _ => {}
        }

        if advance {
            let ctx = &mut self.warps[w];
            ctx.pc += 1;
            if ctx.pc >= self.program.kernels[self.kernel_index].instructions.len() {
                // Falling off the end of the kernel retires the warp cleanly.
                ctx.active = 0;
            }
        }
        Ok(Step::Issued)
    }

    fn fire_hook(&mut self, w: usize, pc: usize, instr: &Instruction, enabled: u64, global_index: u64) {
        if let Some(dest) = instr.dest {
            let ev = WriteEvent {
                kernel_index: self.kernel_index as u32,
                pc,
                warp: w as u32,
                opcode: instr.opcode,
                dest,
                write_mask: enabled,
                global_index,
            };
            (self.hook)(&mut self.state, &ev);
        }
    }

    #[inline]
    fn read(&self, w: usize, t: u32, op: &Operand) -> u32 {
        match op {
            Operand::Reg(r) => self.state.reg(w as u32, t, *r),
            Operand::Imm(v) => *v,
            Operand::Tid => t,
            Operand::Wid => w as u32,
        }
    }

    #[inline]
    fn write_gpr(&mut self, w: usize, t: u32, instr: &Instruction, value: u32) {
        let Some(Dest::Gpr(r)) = instr.dest else { unreachable!() };
        self.state.set_reg(w as u32, t, r, value);
    }
}

fn iter_mask(mask: u64) -> impl Iterator<Item = u32> {
    (0..64u32).filter(move |t| mask >> t & 1 == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::parse_program;

    fn run_src(src: &str) -> RunResult {
        let p = parse_program(src).unwrap();
        execute(&p, &ExecConfig::default()).unwrap()
    }

    /// Independent reference: wrapping Fibonacci series.
    fn fib_wrapping(n: usize) -> Vec<u32> {
        let mut series = vec![1u32, 1u32];
        while series.len() < n {
            let k = series.len();
            series.push(series[k - 1].wrapping_add(series[k - 2]));
        }
        series
    }

    fn fib_program(steps: usize) -> String {
        let mut src = String::from(".shmem 4\n.output 0 1\n.kernel fib\nMOVI R0, 1\nMOVI R1, 1\n");
        // R2 and R3 roll the last two values.
        src.push_str("MOV R2, R0\nMOV R3, R1\n");
        for _ in 0..steps {
            src.push_str("IADD R4, R3, R2\nMOV R2, R3\nMOV R3, R4\n");
        }
        src.push_str("STS [0], R3\nEXIT\n");
        src
    }

    #[test]
    fn fibonacci_matches_reference() {
        let steps = 60; // deep enough to wrap
        let result = run_src(&fib_program(steps));
        assert_eq!(result.status, RunStatus::Exited(0));
        assert!(result.records.is_empty());
        let reference = fib_wrapping(steps + 2);
        assert_eq!(result.output[0], reference[steps + 1]);
    }

    #[test]
    fn single_exit_counts_one() {
        let result = run_src(".kernel k\nEXIT\n");
        assert_eq!(result.status, RunStatus::Exited(0));
        assert_eq!(result.dynamic_count, 1);
    }

    #[test]
    fn infinite_loop_hangs_at_budget() {
        let p = parse_program(".kernel k\nL: BRA L\n").unwrap();
        let result = execute(&p, &ExecConfig::with_budget(1000)).unwrap();
        assert_eq!(result.status, RunStatus::Hang);
        assert_eq!(result.dynamic_count, 1000);
    }

    #[test]
    fn repeated_execution_is_bit_identical() {
        let src = fib_program(10);
        let p = parse_program(&src).unwrap();
        let a = execute(&p, &ExecConfig::default()).unwrap();
        let b = execute(&p, &ExecConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn warp_uniform_programs_have_identical_threads() {
        let src = ".threads_per_warp 8\n.kernel k\nMOVI R1, 5\nMOVI R2, 7\nIADD R3, R1, R2\nIMAD R4, R3, R1, R2\nEXIT\n";
        let p = parse_program(src).unwrap();
        let mut rows: Vec<Vec<u32>> = Vec::new();
        execute_with_hook(&p, &ExecConfig::default(), |state, ev| {
            if ev.opcode == Opcode::Imad {
                rows = (0..8).map(|t| (0..8u8).map(|r| state.reg(0, t, r)).collect()).collect();
            }
        })
        .unwrap();
        for row in &rows[1..] {
            assert_eq!(row, &rows[0]);
        }
    }

    #[test]
    fn raising_budget_preserves_exited_results() {
        let src = fib_program(5);
        let p = parse_program(&src).unwrap();
        let small = execute(&p, &ExecConfig::with_budget(10_000)).unwrap();
        assert!(small.status.is_exited());
        let big = execute(&p, &ExecConfig::with_budget(1_000_000)).unwrap();
        assert_eq!(small, big);
    }

    #[test]
    fn out_of_range_lds_faults_at_offender() {
        let src = ".shmem 4\n.kernel k\nMOVI R1, 9\nLDS R2, [R1]\nEXIT\n";
        let result = run_src(src);
        assert_eq!(result.status, RunStatus::Fault(FaultKind::OutOfRangeAddress));
        // Fault confinement: count equals the faulting index + 1.
        assert_eq!(result.dynamic_count, 2);
    }

    #[test]
    fn out_of_range_sts_faults() {
        let result = run_src(".shmem 2\n.kernel k\nSTS [7], 1\nEXIT\n");
        assert_eq!(result.status, RunStatus::Fault(FaultKind::OutOfRangeAddress));
        assert_eq!(result.dynamic_count, 1);
    }

    #[test]
    fn retargeted_branch_out_of_kernel_is_illegal() {
        let p = parse_program(".kernel k\nL: IADD R1, R1, R1\nBRA L\n").unwrap();
        let bad = p.retarget_branch(0, 1, 99);
        let result = execute(&bad, &ExecConfig::default()).unwrap();
        assert_eq!(result.status, RunStatus::Fault(FaultKind::IllegalInstruction));
    }

    #[test]
    fn p2r_packs_predicates_low_bits() {
        let src = "\
.kernel k
MOVI R1, 5
MOVI R2, 3
ISETP.GT P0, R1, R2
ISETP.LT P1, R1, R2
ISETP.GE P2, R1, R2
ISETP.NE P3, R1, R2
ISETP.EQ P4, R1, R1
P2R R7
EXIT
";
        let p = parse_program(src).unwrap();
        let mut packed = 0u32;
        execute_with_hook(&p, &ExecConfig::default(), |state, ev| {
            if ev.opcode == Opcode::P2r {
                packed = state.reg(0, 0, 7);
            }
        })
        .unwrap();
        assert_eq!(packed, 0b11101);
    }

    #[test]
    fn signed_compare_semantics() {
        let src = ".kernel k\nMOVI R1, -1\nMOVI R2, 1\nISETP.LT P0, R1, R2\nEXIT\n";
        let p = parse_program(src).unwrap();
        let mut p0 = false;
        execute_with_hook(&p, &ExecConfig::default(), |state, ev| {
            if ev.opcode == Opcode::Isetp {
                p0 = state.pred(0, 0, 0);
            }
        })
        .unwrap();
        assert!(p0, "-1 < 1 under signed compare");
    }

    #[test]
    fn divergence_reconverges_at_declared_point() {
        let src = "\
.threads_per_warp 4
.shmem 8
.output 0 4
.kernel div
.reconv join
  MOV R1, %tid
  MOVI R2, 2
  ISETP.LT P0, R1, R2
  @P0 BRA small
  MOVI R3, 100
  BRA join
small:
  MOVI R3, 7
join:
  MOV R4, %tid
  IADD R5, R3, R4
  MOV R6, %tid
  STS [R6], R5
  EXIT
";
        let result = run_src(src);
        assert_eq!(result.status, RunStatus::Exited(0));
        assert_eq!(result.output, vec![7, 8, 102, 103]);
    }

    #[test]
    fn divergence_without_reconv_is_an_error() {
        let src = "\
.threads_per_warp 4
.kernel k
  MOV R1, %tid
  ISETP.LT P0, R1, 2
  @P0 BRA away
  EXIT
away:
  EXIT
";
        let p = parse_program(src).unwrap();
        let err = execute(&p, &ExecConfig::default()).unwrap_err();
        assert!(matches!(err, ExecError::DivergenceWithoutReconv { .. }));
    }

    #[test]
    fn chk_mismatch_dumps_and_exits_nonzero() {
        let src = ".kernel k\nMOVI R1, 5\nCHK R1, 6\nEXIT\n";
        let result = run_src(src);
        assert_eq!(result.status, RunStatus::Exited(1));
        assert_eq!(result.records.len(), 1);
        assert_eq!(result.records[0].reason, RecordReason::Check);
        assert!(result.stdout.contains("CHK mismatch"));
    }

    #[test]
    fn chk_match_is_silent() {
        let result = run_src(".kernel k\nMOVI R1, 5\nCHK R1, 5\nEXIT\n");
        assert_eq!(result.status, RunStatus::Exited(0));
        assert!(result.records.is_empty());
        assert!(result.stdout.is_empty());
    }

    #[test]
    fn record_dumps_and_continues() {
        let result = run_src(".kernel k\nMOVI R1, 42\nRECORD\nMOVI R2, 1\nEXIT\n");
        assert_eq!(result.status, RunStatus::Exited(0));
        assert_eq!(result.records.len(), 1);
        assert_eq!(result.records[0].reason, RecordReason::Explicit);
        assert_eq!(result.records[0].regs[0][1], 42);
        assert_eq!(result.dynamic_count, 4);
    }

    #[test]
    fn multi_warp_issue_rate_is_one_per_cycle() {
        let src = ".warps 4\n.kernel k\nMOVI R1, 1\nMOVI R2, 2\nIADD R3, R1, R2\nEXIT\n";
        let p = parse_program(src).unwrap();
        let r = execute(&p, &ExecConfig::default()).unwrap();
        assert_eq!(r.dynamic_count, 16);
        assert_eq!(r.cycles, 16);
    }

    #[test]
    fn issue_slots_bound_cycles() {
        let src = ".warps 4\n.kernel k\nMOVI R1, 1\nMOVI R2, 2\nIADD R3, R1, R2\nEXIT\n";
        let p = parse_program(src).unwrap();
        let cfg = ExecConfig { issue_slots: 2, ..ExecConfig::default() };
        let r = execute(&p, &cfg).unwrap();
        assert_eq!(r.dynamic_count, 16);
        assert_eq!(r.cycles, 8);
    }

    #[test]
    fn sts_collisions_resolve_to_highest_thread() {
        let src = ".threads_per_warp 4\n.shmem 2\n.output 0 1\n.kernel k\nMOV R1, %tid\nSTS [0], R1\nEXIT\n";
        let result = run_src(src);
        assert_eq!(result.output, vec![3]);
    }

    #[test]
    fn exit_code_propagates() {
        let result = run_src(".kernel k\nEXIT 3\n");
        assert_eq!(result.status, RunStatus::Exited(3));
        assert!(result.stdout.contains("code=3"));
    }

    #[test]
    fn multiple_kernels_share_shmem() {
        let src = "\
.shmem 4
.output 0 1
.kernel producer
MOVI R1, 77
STS [0], R1
EXIT
.kernel consumer
LDS R2, [0]
IADD R3, R2, R2
STS [0], R3
EXIT
";
        let result = run_src(src);
        assert_eq!(result.status, RunStatus::Exited(0));
        assert_eq!(result.output, vec![154]);
        assert_eq!(result.kernel_stats.len(), 2);
    }
}
