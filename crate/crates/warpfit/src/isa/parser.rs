//! Line-oriented assembler for the mini-ISA text grammar.
//!
//! One instruction per line: `OPCODE DST, SRC1, SRC2[, SRC3]`. Labels are
//! `name:`, comments run from `#` to end of line. Program directives:
//! `.warps N`, `.threads_per_warp N`, `.shmem N`, `.output ADDR LEN`;
//! `.kernel NAME` opens a kernel and `.reconv LABEL` (inside a kernel)
//! declares its reconvergence point. Shared-memory operands are bracketed:
//! `LDS R5, [R1]`, `STS [3], R5`. Immediates may be decimal, `0x` hex,
//! negative (two's complement), or contain `.` for 32-bit float bit patterns.
//! `%tid` and `%wid` read the thread and warp index.

use super::types::{
    CmpOp, Dest, Guard, Instruction, Kernel, Opcode, Operand, OutputRegion, Program, GPR_COUNT,
    MAX_THREADS_PER_WARP, PRED_COUNT,
};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown opcode `{mnemonic}`")]
    UnknownOpcode { line: usize, mnemonic: String },
    #[error("line {line}: register index out of range: `{token}`")]
    RegisterRange { line: usize, token: String },
    #[error("kernel `{kernel}`: unresolved label `{label}`")]
    UnresolvedLabel { kernel: String, label: String },
    #[error("kernel `{kernel}` has no instructions")]
    EmptyKernel { kernel: String },
    #[error("program has no kernels")]
    NoKernels,
    #[error("line {line}: duplicate {what} `{name}`")]
    Duplicate { line: usize, what: String, name: String },
    #[error("invalid program metadata: {0}")]
    Metadata(String),
}

struct PendingKernel {
    name: String,
    instructions: Vec<Instruction>,
    // Raw label names per branch, resolved once the kernel body is complete.
    branch_labels: Vec<(usize, String, usize)>, // (instr index, label, source line)
    labels: HashMap<String, usize>,
    reconv: Option<(String, usize)>,
}

pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let mut warps: u32 = 1;
    let mut threads_per_warp: u32 = 32;
    let mut shmem_words: u32 = 64;
    let mut output: Option<OutputRegion> = None;
    let mut kernels: Vec<Kernel> = Vec::new();
    let mut current: Option<PendingKernel> = None;
    let mut seen_kernels: Vec<String> = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut rest = line.trim();
        if rest.is_empty() {
            continue;
        }

        if let Some(directive) = rest.strip_prefix('.') {
            let mut parts = directive.split_whitespace();
            let name = parts.next().unwrap_or("");
            let args: Vec<&str> = parts.collect();
            match name {
                "kernel" => {
                    if args.len() != 1 {
                        return Err(syntax(line_no, ".kernel takes one name"));
                    }
                    if let Some(k) = current.take() {
                        kernels.push(finish_kernel(k)?);
                    }
                    let kname = args[0].to_string();
                    if seen_kernels.contains(&kname) {
                        return Err(ParseError::Duplicate {
                            line: line_no,
                            what: "kernel".into(),
                            name: kname,
                        });
                    }
                    seen_kernels.push(kname.clone());
                    current = Some(PendingKernel {
                        name: kname,
                        instructions: Vec::new(),
                        branch_labels: Vec::new(),
                        labels: HashMap::new(),
                        reconv: None,
                    });
                }
                "reconv" => {
                    let k = current
                        .as_mut()
                        .ok_or_else(|| syntax(line_no, ".reconv outside a kernel"))?;
                    if args.len() != 1 {
                        return Err(syntax(line_no, ".reconv takes one label"));
                    }
                    k.reconv = Some((args[0].to_string(), line_no));
                }
                "warps" => warps = parse_directive_int(line_no, &args)?,
                "threads_per_warp" => threads_per_warp = parse_directive_int(line_no, &args)?,
                "shmem" => shmem_words = parse_directive_int(line_no, &args)?,
                "output" => {
                    if args.len() != 2 {
                        return Err(syntax(line_no, ".output takes ADDR LEN"));
                    }
                    let addr = parse_plain_int(line_no, args[0])?;
                    let len = parse_plain_int(line_no, args[1])?;
                    output = Some(OutputRegion { addr, len });
                }
                other => return Err(syntax(line_no, &format!("unknown directive `.{other}`"))),
            }
            continue;
        }

        // Leading labels, possibly several, possibly followed by an instruction.
        loop {
            let Some(colon) = rest.find(':') else { break };
            let candidate = &rest[..colon];
            if !is_identifier(candidate) {
                break;
            }
            let k = current
                .as_mut()
                .ok_or_else(|| syntax(line_no, "label outside a kernel"))?;
            let at = k.instructions.len();
            if k.labels.insert(candidate.to_string(), at).is_some() {
                return Err(ParseError::Duplicate {
                    line: line_no,
                    what: "label".into(),
                    name: candidate.to_string(),
                });
            }
            rest = rest[colon + 1..].trim_start();
        }
        if rest.is_empty() {
            continue;
        }

        let k = current
            .as_mut()
            .ok_or_else(|| syntax(line_no, "instruction outside a kernel"))?;
        let at = k.instructions.len();
        let (instr, branch_label) = parse_instruction(line_no, rest)?;
        if let Some(label) = branch_label {
            k.branch_labels.push((at, label, line_no));
        }
        k.instructions.push(instr);
    }

    if let Some(k) = current.take() {
        kernels.push(finish_kernel(k)?);
    }
    if kernels.is_empty() {
        return Err(ParseError::NoKernels);
    }

    if warps == 0 || warps > 1024 {
        return Err(ParseError::Metadata(format!("warp count {warps} out of range 1..=1024")));
    }
    if threads_per_warp == 0 || threads_per_warp > MAX_THREADS_PER_WARP {
        return Err(ParseError::Metadata(format!(
            "threads_per_warp {threads_per_warp} out of range 1..={MAX_THREADS_PER_WARP}"
        )));
    }
    if shmem_words > (1 << 22) {
        return Err(ParseError::Metadata(format!("shmem size {shmem_words} too large")));
    }
    if let Some(region) = output {
        let end = region.addr as u64 + region.len as u64;
        if end > shmem_words as u64 {
            return Err(ParseError::Metadata(format!(
                "output region {}..{end} exceeds shmem size {shmem_words}",
                region.addr
            )));
        }
    }

    Ok(Program { kernels, warps, threads_per_warp, shmem_words, output })
}

fn finish_kernel(pending: PendingKernel) -> Result<Kernel, ParseError> {
    let PendingKernel { name, mut instructions, branch_labels, labels, reconv } = pending;
    if instructions.is_empty() {
        return Err(ParseError::EmptyKernel { kernel: name });
    }
    for (idx, label, _line) in &branch_labels {
        let target = *labels.get(label).ok_or_else(|| ParseError::UnresolvedLabel {
            kernel: name.clone(),
            label: label.clone(),
        })?;
        if target >= instructions.len() {
            return Err(ParseError::UnresolvedLabel {
                kernel: name.clone(),
                label: format!("{label} (does not precede an instruction)"),
            });
        }
        instructions[*idx].target = Some(target);
    }
    let reconv = match reconv {
        Some((label, _line)) => {
            let target = *labels.get(&label).ok_or_else(|| ParseError::UnresolvedLabel {
                kernel: name.clone(),
                label: label.clone(),
            })?;
            if target >= instructions.len() {
                return Err(ParseError::UnresolvedLabel {
                    kernel: name.clone(),
                    label: format!("{label} (does not precede an instruction)"),
                });
            }
            Some(target)
        }
        None => None,
    };
    Ok(Kernel { name, instructions, reconv })
}

fn parse_instruction(line: usize, text: &str) -> Result<(Instruction, Option<String>), ParseError> {
    let mut rest = text.trim();
    let mut guard = None;
    if let Some(after) = rest.strip_prefix('@') {
        let end = after
            .find(char::is_whitespace)
            .ok_or_else(|| syntax(line, "guard without an instruction"))?;
        let (gtext, tail) = after.split_at(end);
        let (expect, pname) = match gtext.strip_prefix('!') {
            Some(p) => (false, p),
            None => (true, gtext),
        };
        let pred = parse_pred_index(line, pname)?;
        guard = Some(Guard { pred, expect });
        rest = tail.trim_start();
    }

    let (head, tail) = match rest.find(char::is_whitespace) {
        Some(pos) => (&rest[..pos], rest[pos..].trim_start()),
        None => (rest, ""),
    };
    let (mnemonic, cmp) = match head.split_once('.') {
        Some((base, suffix)) => {
            let cmp = CmpOp::from_suffix(suffix)
                .ok_or_else(|| syntax(line, &format!("unknown comparison `.{suffix}`")))?;
            (base, Some(cmp))
        }
        None => (head, None),
    };
    let opcode = Opcode::from_mnemonic(mnemonic).ok_or_else(|| ParseError::UnknownOpcode {
        line,
        mnemonic: mnemonic.to_string(),
    })?;
    if cmp.is_some() && opcode != Opcode::Isetp {
        return Err(syntax(line, "comparison suffix is only valid on ISETP"));
    }

    let tokens: Vec<&str> = if tail.is_empty() {
        Vec::new()
    } else {
        tail.split(',').map(str::trim).collect()
    };
    if tokens.iter().any(|t| t.is_empty()) {
        return Err(syntax(line, "empty operand"));
    }

    let mut instr = Instruction::new(opcode);
    instr.guard = guard;
    match opcode {
        Opcode::Iadd | Opcode::Fadd => {
            expect_operands(line, &tokens, 3)?;
            instr.dest = Some(Dest::Gpr(parse_gpr(line, tokens[0])?));
            instr.srcs = vec![parse_operand(line, tokens[1])?, parse_operand(line, tokens[2])?];
        }
        Opcode::Imad | Opcode::Ffma => {
            expect_operands(line, &tokens, 4)?;
            instr.dest = Some(Dest::Gpr(parse_gpr(line, tokens[0])?));
            instr.srcs = vec![
                parse_operand(line, tokens[1])?,
                parse_operand(line, tokens[2])?,
                parse_operand(line, tokens[3])?,
            ];
        }
        Opcode::Mov => {
            expect_operands(line, &tokens, 2)?;
            instr.dest = Some(Dest::Gpr(parse_gpr(line, tokens[0])?));
            let src = parse_operand(line, tokens[1])?;
            if matches!(src, Operand::Imm(_)) {
                return Err(syntax(line, "MOV takes a register source; use MOVI for immediates"));
            }
            instr.srcs = vec![src];
        }
        Opcode::Movi => {
            expect_operands(line, &tokens, 2)?;
            instr.dest = Some(Dest::Gpr(parse_gpr(line, tokens[0])?));
            let src = parse_operand(line, tokens[1])?;
            if !matches!(src, Operand::Imm(_)) {
                return Err(syntax(line, "MOVI takes an immediate source"));
            }
            instr.srcs = vec![src];
        }
        Opcode::Lds => {
            expect_operands(line, &tokens, 2)?;
            instr.dest = Some(Dest::Gpr(parse_gpr(line, tokens[0])?));
            instr.addr = Some(parse_mem_operand(line, tokens[1])?);
        }
        Opcode::Sts => {
            expect_operands(line, &tokens, 2)?;
            instr.addr = Some(parse_mem_operand(line, tokens[0])?);
            instr.srcs = vec![parse_operand(line, tokens[1])?];
        }
        Opcode::Isetp => {
            expect_operands(line, &tokens, 3)?;
            instr.dest = Some(Dest::Pred(parse_pred(line, tokens[0])?));
            instr.srcs = vec![parse_operand(line, tokens[1])?, parse_operand(line, tokens[2])?];
            instr.cmp = Some(cmp.unwrap_or(CmpOp::Eq));
        }
        Opcode::P2r => {
            expect_operands(line, &tokens, 1)?;
            instr.dest = Some(Dest::Gpr(parse_gpr(line, tokens[0])?));
        }
        Opcode::Bra => {
            expect_operands(line, &tokens, 1)?;
            if !is_identifier(tokens[0]) {
                return Err(syntax(line, "BRA takes a label"));
            }
            return Ok((instr, Some(tokens[0].to_string())));
        }
        Opcode::Chk => {
            expect_operands(line, &tokens, 2)?;
            let observed = parse_operand(line, tokens[0])?;
            if !matches!(observed, Operand::Reg(_)) {
                return Err(syntax(line, "CHK observes a register"));
            }
            instr.srcs = vec![observed, parse_operand(line, tokens[1])?];
        }
        Opcode::Record => expect_operands(line, &tokens, 0)?,
        Opcode::Exit => {
            if tokens.len() > 1 {
                return Err(syntax(line, "EXIT takes at most one immediate"));
            }
            if let Some(tok) = tokens.first() {
                let code = parse_operand(line, tok)?;
                if !matches!(code, Operand::Imm(_)) {
                    return Err(syntax(line, "EXIT code must be an immediate"));
                }
                instr.srcs = vec![code];
            }
        }
    }
    Ok((instr, None))
}

fn expect_operands(line: usize, tokens: &[&str], n: usize) -> Result<(), ParseError> {
    if tokens.len() != n {
        return Err(syntax(line, &format!("expected {n} operand(s), found {}", tokens.len())));
    }
    Ok(())
}

fn parse_operand(line: usize, token: &str) -> Result<Operand, ParseError> {
    if token == "%tid" {
        return Ok(Operand::Tid);
    }
    if token == "%wid" {
        return Ok(Operand::Wid);
    }
    if let Some(idx) = token.strip_prefix('R') {
        if idx.chars().all(|c| c.is_ascii_digit()) && !idx.is_empty() {
            return Ok(Operand::Reg(parse_gpr(line, token)?));
        }
    }
    parse_immediate(line, token).map(Operand::Imm)
}

fn parse_mem_operand(line: usize, token: &str) -> Result<Operand, ParseError> {
    let inner = token
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| syntax(line, "memory operand must be bracketed, e.g. [R1] or [5]"))?;
    parse_operand(line, inner.trim())
}

fn parse_gpr(line: usize, token: &str) -> Result<u8, ParseError> {
    let idx = token
        .strip_prefix('R')
        .filter(|t| !t.is_empty() && t.chars().all(|c| c.is_ascii_digit()))
        .ok_or_else(|| syntax(line, &format!("expected a register, found `{token}`")))?;
    let n: u32 = idx
        .parse()
        .map_err(|_| ParseError::RegisterRange { line, token: token.to_string() })?;
    if n >= GPR_COUNT as u32 {
        return Err(ParseError::RegisterRange { line, token: token.to_string() });
    }
    Ok(n as u8)
}

fn parse_pred(line: usize, token: &str) -> Result<u8, ParseError> {
    let idx = token
        .strip_prefix('P')
        .filter(|t| !t.is_empty() && t.chars().all(|c| c.is_ascii_digit()))
        .ok_or_else(|| syntax(line, &format!("expected a predicate register, found `{token}`")))?;
    parse_pred_index(line, &format!("P{idx}"))
}

fn parse_pred_index(line: usize, token: &str) -> Result<u8, ParseError> {
    let idx = token
        .strip_prefix('P')
        .filter(|t| !t.is_empty() && t.chars().all(|c| c.is_ascii_digit()))
        .ok_or_else(|| syntax(line, &format!("expected a predicate register, found `{token}`")))?;
    let n: u32 = idx
        .parse()
        .map_err(|_| ParseError::RegisterRange { line, token: token.to_string() })?;
    if n >= PRED_COUNT as u32 {
        return Err(ParseError::RegisterRange { line, token: token.to_string() });
    }
    Ok(n as u8)
}

fn parse_immediate(line: usize, token: &str) -> Result<u32, ParseError> {
    if let Some(hex) = token.strip_prefix("0x").or_else(|| token.strip_prefix("0X")) {
        return u32::from_str_radix(hex, 16)
            .map_err(|_| syntax(line, &format!("bad hex immediate `{token}`")));
    }
    if token.contains('.') {
        let f: f32 = token
            .parse()
            .map_err(|_| syntax(line, &format!("bad float immediate `{token}`")))?;
        return Ok(f.to_bits());
    }
    if let Some(neg) = token.strip_prefix('-') {
        let v: i64 = neg
            .parse()
            .map_err(|_| syntax(line, &format!("bad immediate `{token}`")))
            .map(|v: i64| -v)?;
        if v < i32::MIN as i64 {
            return Err(syntax(line, &format!("immediate `{token}` out of range")));
        }
        return Ok(v as i32 as u32);
    }
    let v: u64 = token
        .parse()
        .map_err(|_| syntax(line, &format!("bad immediate `{token}`")))?;
    if v > u32::MAX as u64 {
        return Err(syntax(line, &format!("immediate `{token}` out of range")));
    }
    Ok(v as u32)
}

fn parse_directive_int(line: usize, args: &[&str]) -> Result<u32, ParseError> {
    if args.len() != 1 {
        return Err(syntax(line, "directive takes one integer"));
    }
    parse_plain_int(line, args[0])
}

fn parse_plain_int(line: usize, token: &str) -> Result<u32, ParseError> {
    token.parse().map_err(|_| syntax(line, &format!("bad integer `{token}`")))
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn syntax(line: usize, msg: &str) -> ParseError {
    ParseError::Syntax { line, msg: msg.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_identity_for_iadd() {
        let p = parse_program(".kernel k\nIADD R3, R1, R2\nEXIT\n").unwrap();
        let instr = &p.kernels[0].instructions[0];
        assert_eq!(instr.opcode, Opcode::Iadd);
        assert_eq!(instr.dest, Some(Dest::Gpr(3)));
        assert_eq!(instr.srcs, vec![Operand::Reg(1), Operand::Reg(2)]);
    }

    #[test]
    fn empty_kernel_is_rejected() {
        let err = parse_program(".kernel k\n").unwrap_err();
        assert!(matches!(err, ParseError::EmptyKernel { .. }));
    }

    #[test]
    fn unresolved_label_is_rejected() {
        let err = parse_program(".kernel k\nBRA missing_label\n").unwrap_err();
        assert!(matches!(err, ParseError::UnresolvedLabel { ref label, .. } if label == "missing_label"));
    }

    #[test]
    fn register_out_of_range() {
        let err = parse_program(".kernel k\nIADD R64, R0, R1\n").unwrap_err();
        assert!(matches!(err, ParseError::RegisterRange { line: 2, .. }));
        let err = parse_program(".kernel k\nISETP.LT P7, R0, R1\n").unwrap_err();
        assert!(matches!(err, ParseError::RegisterRange { .. }));
    }

    #[test]
    fn unknown_opcode_reports_line() {
        let err = parse_program(".kernel k\nIADD R1, R0, R0\nFROB R1\n").unwrap_err();
        assert_eq!(err, ParseError::UnknownOpcode { line: 3, mnemonic: "FROB".into() });
    }

    #[test]
    fn labels_guards_and_brackets() {
        let src = "\
.shmem 8
.kernel k
top:
  MOVI R1, 3
  ISETP.GT P0, R1, 0
  @P0 BRA done
  STS [0], R1
done:
  LDS R2, [0]
  @!P0 EXIT 1
  EXIT
";
        let p = parse_program(src).unwrap();
        let k = &p.kernels[0];
        assert_eq!(k.instructions[2].target, Some(4));
        assert_eq!(k.instructions[2].guard, Some(Guard { pred: 0, expect: true }));
        assert_eq!(k.instructions[3].addr, Some(Operand::Imm(0)));
        assert_eq!(k.instructions[5].guard, Some(Guard { pred: 0, expect: false }));
    }

    #[test]
    fn float_and_negative_immediates() {
        let p = parse_program(".kernel k\nMOVI R1, 1.5\nMOVI R2, -1\nEXIT\n").unwrap();
        assert_eq!(p.kernels[0].instructions[0].srcs[0], Operand::Imm(1.5f32.to_bits()));
        assert_eq!(p.kernels[0].instructions[1].srcs[0], Operand::Imm(u32::MAX));
    }

    #[test]
    fn output_region_must_fit_shmem() {
        let err = parse_program(".shmem 4\n.output 2 4\n.kernel k\nEXIT\n").unwrap_err();
        assert!(matches!(err, ParseError::Metadata(_)));
    }

    #[test]
    fn parse_is_deterministic() {
        let src = ".kernel k\nIADD R1, R0, R0\nBRA end\nend:\nEXIT\n";
        assert_eq!(parse_program(src).unwrap(), parse_program(src).unwrap());
    }
}
