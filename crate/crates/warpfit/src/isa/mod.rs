//! Deterministic SIMT mini-ISA: assembly parser, program representation,
//! and warp-synchronous interpreter.

mod interp;
mod parser;
mod types;

pub use interp::{
    execute, execute_with_hook, ExecConfig, ExecError, FaultKind, KernelStats, MachineState,
    RecordEntry, RecordReason, RunResult, RunStatus, WriteEvent,
};
pub use parser::{parse_program, ParseError};
pub use types::{
    CmpOp, Dest, Guard, Instruction, Kernel, Opcode, Operand, OutputRegion, Program, GPR_COUNT,
    MAX_THREADS_PER_WARP, PRED_COUNT,
};
