//! Program representation for the mini-ISA: opcodes, operands, kernels.

use serde::{Deserialize, Serialize};
use std::fmt;

/// General-purpose registers per thread (R0..R63).
pub const GPR_COUNT: u8 = 64;
/// One-bit predicate registers per thread (P0..P6).
pub const PRED_COUNT: u8 = 7;
/// Active-thread masks are held in a u64, which caps the warp width.
pub const MAX_THREADS_PER_WARP: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Opcode {
    Iadd,
    Imad,
    Fadd,
    Ffma,
    Mov,
    Movi,
    Lds,
    Sts,
    Isetp,
    P2r,
    Bra,
    Chk,
    Record,
    Exit,
}

impl Opcode {
    pub const ALL: [Opcode; 14] = [
        Opcode::Iadd,
        Opcode::Imad,
        Opcode::Fadd,
        Opcode::Ffma,
        Opcode::Mov,
        Opcode::Movi,
        Opcode::Lds,
        Opcode::Sts,
        Opcode::Isetp,
        Opcode::P2r,
        Opcode::Bra,
        Opcode::Chk,
        Opcode::Record,
        Opcode::Exit,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Iadd => "IADD",
            Opcode::Imad => "IMAD",
            Opcode::Fadd => "FADD",
            Opcode::Ffma => "FFMA",
            Opcode::Mov => "MOV",
            Opcode::Movi => "MOVI",
            Opcode::Lds => "LDS",
            Opcode::Sts => "STS",
            Opcode::Isetp => "ISETP",
            Opcode::P2r => "P2R",
            Opcode::Bra => "BRA",
            Opcode::Chk => "CHK",
            Opcode::Record => "RECORD",
            Opcode::Exit => "EXIT",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Opcode> {
        Opcode::ALL.iter().copied().find(|op| op.mnemonic() == s)
    }

    /// Index into fixed-size per-opcode count tables.
    pub fn index(self) -> usize {
        Opcode::ALL.iter().position(|&o| o == self).unwrap()
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// Comparison carried by ISETP (signed 32-bit compare).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn suffix(self) -> &'static str {
        match self {
            CmpOp::Eq => "EQ",
            CmpOp::Ne => "NE",
            CmpOp::Lt => "LT",
            CmpOp::Le => "LE",
            CmpOp::Gt => "GT",
            CmpOp::Ge => "GE",
        }
    }

    pub fn from_suffix(s: &str) -> Option<CmpOp> {
        Some(match s {
            "EQ" => CmpOp::Eq,
            "NE" => CmpOp::Ne,
            "LT" => CmpOp::Lt,
            "LE" => CmpOp::Le,
            "GT" => CmpOp::Gt,
            "GE" => CmpOp::Ge,
            _ => return None,
        })
    }

    pub fn eval(self, a: i32, b: i32) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

/// Source operand. `Tid`/`Wid` read the thread index within the warp and the
/// warp index, so programs can address per-thread state without divergence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    Reg(u8),
    Imm(u32),
    Tid,
    Wid,
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => write!(f, "R{r}"),
            Operand::Imm(v) if *v <= 0xFFFF => write!(f, "{v}"),
            Operand::Imm(v) => write!(f, "0x{v:08X}"),
            Operand::Tid => f.write_str("%tid"),
            Operand::Wid => f.write_str("%wid"),
        }
    }
}

/// Write destination: a general-purpose register or a predicate bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dest {
    Gpr(u8),
    Pred(u8),
}

impl fmt::Display for Dest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dest::Gpr(r) => write!(f, "R{r}"),
            Dest::Pred(p) => write!(f, "P{p}"),
        }
    }
}

/// Predication prefix: `@P3` executes when P3 is set, `@!P3` when clear.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Guard {
    pub pred: u8,
    pub expect: bool,
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.expect {
            write!(f, "@P{}", self.pred)
        } else {
            write!(f, "@!P{}", self.pred)
        }
    }
}

/// One decoded instruction. The parser guarantees the shape (which optional
/// fields are populated) matches the opcode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub opcode: Opcode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<Guard>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dest: Option<Dest>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub srcs: Vec<Operand>,
    /// Shared-memory word address for LDS/STS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub addr: Option<Operand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmp: Option<CmpOp>,
    /// Branch target as a resolved instruction index within the kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
}

impl Instruction {
    pub fn new(opcode: Opcode) -> Self {
        Instruction {
            opcode,
            guard: None,
            dest: None,
            srcs: Vec::new(),
            addr: None,
            cmp: None,
            target: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Kernel {
    pub name: String,
    pub instructions: Vec<Instruction>,
    /// Reconvergence point for diverged warps, declared with `.reconv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconv: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRegion {
    pub addr: u32,
    pub len: u32,
}

/// A parsed program: kernels executed in order plus launch metadata.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub kernels: Vec<Kernel>,
    pub warps: u32,
    pub threads_per_warp: u32,
    pub shmem_words: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputRegion>,
}

impl Program {
    pub fn kernel(&self, name: &str) -> Option<&Kernel> {
        self.kernels.iter().find(|k| k.name == name)
    }

    pub fn kernel_index(&self, name: &str) -> Option<usize> {
        self.kernels.iter().position(|k| k.name == name)
    }

    /// Copy of the program with one branch retargeted to an arbitrary
    /// instruction index (which may lie outside the kernel). Used to study
    /// control-flow corruption; the parser itself never produces
    /// out-of-range targets.
    pub fn retarget_branch(&self, kernel: usize, pc: usize, new_target: usize) -> Program {
        let mut p = self.clone();
        let instr = &mut p.kernels[kernel].instructions[pc];
        assert_eq!(instr.opcode, Opcode::Bra, "retarget_branch requires a BRA at the given pc");
        instr.target = Some(new_target);
        p
    }

    /// Render back to assembly text. Labels are synthesized from branch
    /// target indices, so `parse_program(p.to_asm()) == p`.
    pub fn to_asm(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(".warps {}\n", self.warps));
        out.push_str(&format!(".threads_per_warp {}\n", self.threads_per_warp));
        out.push_str(&format!(".shmem {}\n", self.shmem_words));
        if let Some(region) = self.output {
            out.push_str(&format!(".output {} {}\n", region.addr, region.len));
        }
        for kernel in &self.kernels {
            out.push_str(&format!(".kernel {}\n", kernel.name));
            let mut labels: Vec<usize> = kernel
                .instructions
                .iter()
                .filter_map(|i| i.target)
                .chain(kernel.reconv)
                .collect();
            labels.sort_unstable();
            labels.dedup();
            if let Some(rc) = kernel.reconv {
                out.push_str(&format!(".reconv L{rc}\n"));
            }
            for (idx, instr) in kernel.instructions.iter().enumerate() {
                if labels.contains(&idx) {
                    out.push_str(&format!("L{idx}:\n"));
                }
                out.push_str("    ");
                out.push_str(&render_instruction(instr));
                out.push('\n');
            }
        }
        out
    }
}

fn render_instruction(instr: &Instruction) -> String {
    let mut s = String::new();
    if let Some(g) = instr.guard {
        s.push_str(&format!("{g} "));
    }
    s.push_str(instr.opcode.mnemonic());
    if instr.opcode == Opcode::Isetp {
        s.push('.');
        s.push_str(instr.cmp.unwrap_or(CmpOp::Eq).suffix());
    }
    let mut operands: Vec<String> = Vec::new();
    match instr.opcode {
        Opcode::Sts => {
            operands.push(format!("[{}]", instr.addr.expect("STS has an address")));
            operands.push(instr.srcs[0].to_string());
        }
        Opcode::Lds => {
            operands.push(instr.dest.expect("LDS has a destination").to_string());
            operands.push(format!("[{}]", instr.addr.expect("LDS has an address")));
        }
        Opcode::Bra => {
            operands.push(format!("L{}", instr.target.expect("BRA has a target")));
        }
        _ => {
            if let Some(d) = instr.dest {
                operands.push(d.to_string());
            }
            for src in &instr.srcs {
                operands.push(src.to_string());
            }
        }
    }
    if !operands.is_empty() {
        s.push(' ');
        s.push_str(&operands.join(", "));
    }
    s
}
