//! Recursive-descent disassembly, function discovery, and basic-block
//! partitioning.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::loader::BinaryImage;
use crate::Va;

use super::{decode_one, BasicBlock, BlockId, ControlFlowGraph, DecodeErrorKind, Flow, Instruction};

#[derive(Debug, Error)]
pub enum DisasmError {
    #[error("entry point 0x{0:08x} is not inside an executable section")]
    EntryOutOfRange(Va),
}

/// Result of disassembling one function: instructions keyed by address plus
/// the addresses where a reachable path hit undecodable bytes.
#[derive(Debug, Clone)]
pub struct FunctionDisassembly {
    pub entry: Va,
    pub instructions: BTreeMap<Va, Instruction>,
    pub decode_errors: Vec<(Va, DecodeErrorKind)>,
}

/// Recursive-descent decode starting at `entry`, following fallthrough and
/// direct branch targets. Paths stop at `ret`, undecodable bytes (recorded,
/// other paths continue), and section boundaries. Direct `call` targets are
/// not followed; the call's fallthrough is.
pub fn disassemble_function(
    image: &BinaryImage,
    entry: Va,
) -> Result<FunctionDisassembly, DisasmError> {
    if !image.is_executable(entry) {
        return Err(DisasmError::EntryOutOfRange(entry));
    }

    let mut instructions = BTreeMap::new();
    let mut decode_errors = Vec::new();
    let mut worklist = vec![entry];
    let mut queued: BTreeSet<Va> = BTreeSet::new();
    queued.insert(entry);

    while let Some(va) = worklist.pop() {
        if instructions.contains_key(&va) {
            continue;
        }
        let Some(section) = image.section_containing(va) else {
            continue;
        };
        if !section.flags.executable {
            continue;
        }
        let window_len = (section.end() - va as u64).min(MAX_DECODE_WINDOW as u64) as usize;
        let window = image.read_bytes(va, window_len);
        let ins = match decode_one(&window, va) {
            Ok(ins) => ins,
            Err(kind) => {
                decode_errors.push((va, kind));
                continue;
            }
        };

        let mut enqueue = |target: Va, worklist: &mut Vec<Va>| {
            if image.is_executable(target) && queued.insert(target) {
                worklist.push(target);
            }
        };

        match ins.flow {
            Flow::Sequential | Flow::Call(_) | Flow::CallIndirect => {
                enqueue(ins.next_address(), &mut worklist);
            }
            Flow::Jump(target) => {
                enqueue(target, &mut worklist);
            }
            Flow::CondJump(target) => {
                enqueue(target, &mut worklist);
                enqueue(ins.next_address(), &mut worklist);
            }
            Flow::JumpIndirect | Flow::Ret => {}
        }

        instructions.insert(va, ins);
    }

    decode_errors.sort_by_key(|(va, _)| *va);
    Ok(FunctionDisassembly {
        entry,
        instructions,
        decode_errors,
    })
}

const MAX_DECODE_WINDOW: usize = 16;

/// Partition decoded instructions into basic blocks with successor edges.
///
/// Leaders are the entry, every direct branch target, and every instruction
/// following a control transfer (branch, call, or ret). Successor edges only
/// point at decoded leaders; a direct branch whose target failed to decode
/// contributes no edge.
pub fn build_cfg(disasm: &FunctionDisassembly, entry: Va) -> ControlFlowGraph {
    let instructions = &disasm.instructions;
    let mut leaders: BTreeSet<Va> = BTreeSet::new();
    leaders.insert(entry);
    for ins in instructions.values() {
        match ins.flow {
            Flow::Jump(target) | Flow::CondJump(target)
                if instructions.contains_key(&target) =>
            {
                leaders.insert(target);
            }
            _ => {}
        }
        if ins.flow.is_terminator() && instructions.contains_key(&ins.next_address()) {
            leaders.insert(ins.next_address());
        }
    }

    let mut blocks: BTreeMap<Va, BasicBlock> = BTreeMap::new();
    let mut current: Vec<Instruction> = Vec::new();
    let mut current_start: Option<Va> = None;

    let mut flush = |current: &mut Vec<Instruction>, start: &mut Option<Va>| {
        match start.take() {
            Some(s) if !current.is_empty() => {
                blocks.insert(
                    s,
                    BasicBlock {
                        id: BlockId {
                            function_entry: entry,
                            start: s,
                        },
                        instructions: std::mem::take(current),
                        successors: Vec::new(),
                    },
                );
            }
            _ => {}
        }
    };

    let mut prev_end: Option<Va> = None;
    for (&va, ins) in instructions {
        let discontiguous = prev_end.is_some_and(|end| end != va);
        if leaders.contains(&va) || discontiguous || current_start.is_none() {
            flush(&mut current, &mut current_start);
            current_start = Some(va);
        }
        prev_end = Some(ins.next_address());
        let terminates = ins.flow.is_terminator();
        current.push(ins.clone());
        if terminates {
            flush(&mut current, &mut current_start);
        }
    }
    flush(&mut current, &mut current_start);

    // Successor edges; only targets that are block starts qualify.
    let starts: BTreeSet<Va> = blocks.keys().copied().collect();
    for block in blocks.values_mut() {
        let last = block.instructions.last().expect("nonempty block");
        let mut succ = Vec::new();
        let mut push = |va: Va| {
            if starts.contains(&va) {
                succ.push(va);
            }
        };
        match last.flow {
            Flow::Sequential | Flow::Call(_) | Flow::CallIndirect => push(last.next_address()),
            Flow::Jump(target) => push(target),
            Flow::CondJump(target) => {
                push(target);
                push(last.next_address());
            }
            Flow::JumpIndirect | Flow::Ret => {}
        }
        succ.sort_unstable();
        succ.dedup();
        block.successors = succ;
    }

    ControlFlowGraph {
        function_entry: entry,
        blocks,
    }
}

/// Function entry candidates: the image entry point plus every direct call
/// target found by a linear sweep over executable sections.
pub fn discover_functions(image: &BinaryImage) -> Vec<Va> {
    let mut entries: BTreeSet<Va> = BTreeSet::new();
    if image.is_executable(image.entry_point) {
        entries.insert(image.entry_point);
    }

    for section in image.sections.iter().filter(|s| s.flags.executable) {
        let mut va = section.virtual_address;
        let end = section.end();
        while (va as u64) < end {
            let window_len = (end - va as u64).min(MAX_DECODE_WINDOW as u64) as usize;
            let window = image.read_bytes(va, window_len);
            match decode_one(&window, va) {
                Ok(ins) => {
                    if let Flow::Call(target) = ins.flow {
                        if image.is_executable(target) {
                            entries.insert(target);
                        }
                    }
                    va = va.wrapping_add(ins.length as u32);
                    if ins.length == 0 {
                        break;
                    }
                }
                Err(_) => {
                    va = va.wrapping_add(1);
                }
            }
            if va < section.virtual_address {
                break; // wrapped
            }
        }
    }
    entries.into_iter().collect()
}

/// Blocks that branch straight back to themselves.
pub fn has_single_block_loop(cfg: &ControlFlowGraph) -> BTreeSet<Va> {
    cfg.blocks
        .values()
        .filter(|b| b.successors.contains(&b.start()))
        .map(|b| b.start())
        .collect()
}
