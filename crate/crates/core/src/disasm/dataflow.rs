//! Backward intra-procedural register tracing for indirect-call resolution.

use std::collections::{BTreeMap, BTreeSet};

use crate::Va;

use super::{ControlFlowGraph, Flow, Instruction, MemOperand, Operand, Reg, Width};

/// What a register provably holds at a program point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueSource {
    Concrete(u32),
    LoadFrom(Va),
    Unknown,
}

/// Resolved sources for the register operands of indirect call sites.
#[derive(Debug, Clone)]
pub struct DataFlowTrace {
    pub function_entry: Va,
    pub definitions: BTreeMap<(Va, Reg), ValueSource>,
}

impl DataFlowTrace {
    /// Trace every `call <reg>` site in the function.
    pub fn for_indirect_calls(cfg: &ControlFlowGraph) -> DataFlowTrace {
        let mut definitions = BTreeMap::new();
        for block in cfg.blocks.values() {
            for ins in &block.instructions {
                if ins.flow == Flow::CallIndirect {
                    if let Some(reg_op) = ins.operands.first().and_then(Operand::as_register) {
                        definitions.insert(
                            (ins.address, reg_op.reg),
                            trace_register_back(cfg, ins.address, reg_op.reg),
                        );
                    }
                }
            }
        }
        DataFlowTrace {
            function_entry: cfg.function_entry,
            definitions,
        }
    }

    pub fn source_at(&self, site: Va, reg: Reg) -> ValueSource {
        self.definitions
            .get(&(site, reg))
            .copied()
            .unwrap_or(ValueSource::Unknown)
    }
}

/// How many register definitions a single trace may cross before giving up.
const MAX_TRACE_DEFINITIONS: usize = 64;

/// Walk backward from `site` to find what `reg` holds there.
///
/// Only three forms propagate: `mov r, imm` (Concrete), `mov r, [disp32]`
/// from the flat data segment (LoadFrom), and full-width `mov r, r2`
/// (re-target to r2). Anything else that writes the traced register
/// (arithmetic, partial-width moves, pops, calls clobbering caller-saved
/// registers) ends the trace as Unknown. Block traversal follows unique
/// predecessors only and never re-enters a visited block, so loop back-edges
/// are not crossed.
pub fn trace_register_back(cfg: &ControlFlowGraph, site: Va, reg: Reg) -> ValueSource {
    let Some(block) = cfg.block_containing(site) else {
        return ValueSource::Unknown;
    };
    let Some(site_index) = block.instructions.iter().position(|i| i.address == site) else {
        return ValueSource::Unknown;
    };

    let mut target = reg;
    let mut defs_seen = 0usize;
    let mut current = block;
    let mut index = site_index;
    let mut visited: BTreeSet<Va> = BTreeSet::new();
    visited.insert(current.start());

    loop {
        for ins in current.instructions[..index].iter().rev() {
            if !defines(ins, target) {
                continue;
            }
            defs_seen += 1;
            if defs_seen > MAX_TRACE_DEFINITIONS {
                return ValueSource::Unknown;
            }
            match propagation(ins, target) {
                Propagation::Concrete(v) => return ValueSource::Concrete(v),
                Propagation::Load(addr) => return ValueSource::LoadFrom(addr),
                Propagation::CopyOf(src) => {
                    target = src;
                }
                Propagation::Opaque => return ValueSource::Unknown,
            }
        }

        let preds = cfg.predecessors(current.start());
        if preds.len() != 1 {
            return ValueSource::Unknown;
        }
        if !visited.insert(preds[0]) {
            return ValueSource::Unknown; // back-edge
        }
        current = &cfg.blocks[&preds[0]];
        index = current.instructions.len();
    }
}

enum Propagation {
    Concrete(u32),
    Load(Va),
    CopyOf(Reg),
    Opaque,
}

fn propagation(ins: &Instruction, target: Reg) -> Propagation {
    if ins.mnemonic == "mov" {
        let dst = ins.operands.first().and_then(Operand::as_register);
        if dst.is_some_and(|d| d.reg == target && d.width == Width::Dword) {
            match ins.operands.get(1) {
                Some(Operand::Immediate { value, .. }) => {
                    return Propagation::Concrete(*value as u32);
                }
                Some(Operand::Register(src)) if src.width == Width::Dword => {
                    return Propagation::CopyOf(src.reg);
                }
                Some(Operand::Memory(mem)) => {
                    if let Some(addr) = static_load_address(mem) {
                        return Propagation::Load(addr);
                    }
                }
                _ => {}
            }
        }
    }
    // xor r, r zeroes the register
    if ins.mnemonic == "xor" {
        let dst = ins.operands.first().and_then(Operand::as_register);
        let src = ins.operands.get(1).and_then(Operand::as_register);
        if let (Some(d), Some(s)) = (dst, src) {
            if d.reg == target && s.reg == target && d.width == Width::Dword {
                return Propagation::Concrete(0);
            }
        }
    }
    Propagation::Opaque
}

/// Pure-displacement memory operand in the flat data segment.
fn static_load_address(mem: &MemOperand) -> Option<Va> {
    if matches!(mem.segment_prefix, Some(s) if s != super::Seg::Ds) {
        return None;
    }
    mem.absolute()
}

/// Conservative write-set check: does `ins` (possibly partially) define `reg`?
fn defines(ins: &Instruction, reg: Reg) -> bool {
    match ins.mnemonic {
        // calls clobber the stdcall caller-saved set
        "call" => matches!(reg, Reg::Eax | Reg::Ecx | Reg::Edx),
        "cpuid" => matches!(reg, Reg::Eax | Reg::Ebx | Reg::Ecx | Reg::Edx),
        "rdtsc" => matches!(reg, Reg::Eax | Reg::Edx),
        "mul" | "imul" if ins.operands.len() == 1 => matches!(reg, Reg::Eax | Reg::Edx),
        "div" | "idiv" => matches!(reg, Reg::Eax | Reg::Edx),
        "movsb" | "movsw" | "movsd" => matches!(reg, Reg::Esi | Reg::Edi),
        "stosb" | "stosw" | "stosd" | "scasb" | "scasd" => reg == Reg::Edi,
        "lodsb" | "lodsd" => matches!(reg, Reg::Eax | Reg::Esi),
        "leave" => matches!(reg, Reg::Esp | Reg::Ebp),
        "popad" => true,
        "push" => reg == Reg::Esp,
        "pop" => {
            reg == Reg::Esp
                || ins.operands.first().and_then(Operand::as_register).is_some_and(|r| r.reg == reg)
        }
        "mov" | "movzx" | "movsx" | "lea" | "add" | "sub" | "xor" | "or" | "and" | "adc"
        | "sbb" | "inc" | "dec" | "neg" | "not" | "shl" | "shr" | "sal" | "sar" | "rol"
        | "ror" | "rcl" | "rcr" | "imul" | "xchg" | "bswap" | "bts" | "btr" | "btc" => ins
            .operands
            .first()
            .and_then(Operand::as_register)
            .is_some_and(|r| r.reg == reg),
        m if m.starts_with("set") || m.starts_with("cmov") => ins
            .operands
            .first()
            .and_then(Operand::as_register)
            .is_some_and(|r| r.reg == reg),
        _ => false,
    }
}
