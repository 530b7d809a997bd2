//! String evidence: plain static strings referenced by operands, plus the
//! trigger logic deciding when a function deserves emulation for encoded and
//! stack-built strings.

use crate::disasm::{BasicBlock, BlockId, ControlFlowGraph, Operand, Reg};
use crate::loader::BinaryImage;
use crate::Va;

use super::{render_string_feature, Feature, FeatureKind};

/// Thresholds controlling when emulation runs and what counts as a string.
#[derive(Debug, Clone)]
pub struct EmulationTriggerConfig {
    /// Run length of stack-writing movs that triggers emulation ("more than
    /// 5", so 6 by default).
    pub min_consecutive_movs: usize,
    pub min_string_length: usize,
    pub max_steps: u64,
}

impl Default for EmulationTriggerConfig {
    fn default() -> Self {
        EmulationTriggerConfig {
            min_consecutive_movs: 6,
            min_string_length: 4,
            max_steps: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StringEncoding {
    Ascii,
    Utf16le,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StringOrigin {
    Plain,
    Emulated,
}

/// A string recovered from the image or from emulated memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveredString {
    pub value: String,
    pub encoding: StringEncoding,
    pub origin: StringOrigin,
    pub attributed_block: BlockId,
    /// Instruction that referenced (plain) or finally wrote (emulated) it.
    pub source_address: Va,
}

/// Why emulation fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmulationTrigger {
    SingleBlockLoop,
    ConsecutiveMovs,
}

/// NUL-terminated printable ASCII run of at least `min_len` characters.
pub fn read_ascii_string(image: &BinaryImage, va: Va, min_len: usize) -> Option<String> {
    let mut out = String::new();
    let mut addr = va;
    loop {
        let b = image.read_byte(addr)?;
        if b == 0 {
            break;
        }
        if !(0x20..0x7F).contains(&b) {
            return None;
        }
        out.push(b as char);
        if out.len() > 4096 {
            return None;
        }
        addr = addr.checked_add(1)?;
    }
    (out.len() >= min_len).then_some(out)
}

/// NUL-terminated printable UTF-16LE run of at least `min_len` characters.
pub fn read_utf16_string(image: &BinaryImage, va: Va, min_len: usize) -> Option<String> {
    let mut out = String::new();
    let mut addr = va;
    loop {
        let lo = image.read_byte(addr)?;
        let hi = image.read_byte(addr.checked_add(1)?)?;
        if lo == 0 && hi == 0 {
            break;
        }
        if hi != 0 || !(0x20..0x7F).contains(&lo) {
            return None;
        }
        out.push(lo as char);
        if out.len() > 4096 {
            return None;
        }
        addr = addr.checked_add(2)?;
    }
    (out.len() >= min_len).then_some(out)
}

/// Scan a block's operands for readable addresses holding plain strings.
pub fn extract_plain_strings(
    block: &BasicBlock,
    image: &BinaryImage,
    config: &EmulationTriggerConfig,
) -> Vec<Feature> {
    let mut features = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    for ins in &block.instructions {
        for op in &ins.operands {
            let candidate = match op {
                Operand::Immediate { value, .. } => Some(*value as u32),
                Operand::Memory(mem) => mem.absolute(),
                _ => None,
            };
            let Some(va) = candidate else { continue };
            if !image.is_mapped(va) {
                continue;
            }
            let text = read_ascii_string(image, va, config.min_string_length)
                .or_else(|| read_utf16_string(image, va, config.min_string_length));
            let Some(text) = text else { continue };
            if seen.contains(&text) {
                continue;
            }
            seen.push(text.clone());
            features.push(Feature::new(
                FeatureKind::StringRef,
                render_string_feature(&text),
                block.id,
                ins.address,
            ));
        }
    }
    features
}

/// Decide whether `cfg` warrants emulation: a single-block loop, or a run of
/// at least `min_consecutive_movs` movs writing immediates or data-section
/// loads to stack-relative destinations.
pub fn should_emulate(
    cfg: &ControlFlowGraph,
    image: &BinaryImage,
    config: &EmulationTriggerConfig,
) -> Option<EmulationTrigger> {
    if !crate::disasm::has_single_block_loop(cfg).is_empty() {
        return Some(EmulationTrigger::SingleBlockLoop);
    }

    for block in cfg.blocks.values() {
        let mut run = 0usize;
        for ins in &block.instructions {
            if is_stack_building_mov(ins, image) {
                run += 1;
                if run >= config.min_consecutive_movs {
                    return Some(EmulationTrigger::ConsecutiveMovs);
                }
            } else {
                run = 0;
            }
        }
    }
    None
}

/// `mov` to a stack-relative destination from an immediate or a mapped
/// data-section load.
fn is_stack_building_mov(ins: &crate::disasm::Instruction, image: &BinaryImage) -> bool {
    if ins.mnemonic != "mov" {
        return false;
    }
    let Some(Operand::Memory(dst)) = ins.operands.first() else {
        return false;
    };
    if !matches!(dst.base, Some(Reg::Esp) | Some(Reg::Ebp)) {
        return false;
    }
    match ins.operands.get(1) {
        Some(Operand::Immediate { .. }) => true,
        Some(Operand::Memory(src)) => src.absolute().is_some_and(|va| image.is_mapped(va)),
        _ => false,
    }
}
