//! Assembly features: uncommon TADA-related mnemonics and segment-register
//! memory accesses, each augmented with curated explanation text so the
//! rating backend sees context instead of bare abbreviations.

use std::collections::BTreeMap;

use crate::disasm::{BasicBlock, Operand, Seg};

use super::{Feature, FeatureKind};

/// The 15 watched mnemonics with their explanations.
const MNEMONIC_EXPLANATIONS: [(&str, &str); 15] = [
    ("pushf", "Can be used to read/write EFLAGS register"),
    ("pushfd", "Can be used to read/write EFLAGS register"),
    ("popf", "Can be used to read/write EFLAGS register"),
    ("popfd", "Can be used to read/write EFLAGS register"),
    ("pushfq", "Can be used to read/write EFLAGS register"),
    ("popfq", "Can be used to read/write EFLAGS register"),
    ("int", "CPU Interrupt"),
    ("icebp", "Tracing technique, Single Step Exception"),
    ("bts", "Set trap flag when number is exactly 8"),
    ("rdtsc", "Read time-stamp counter"),
    ("sidt", "Access Interupt Descriptor Table"),
    ("sldt", "Access Local Descriptor Table"),
    ("sgdt", "Access Global Descriptor Table"),
    ("str", "Store Task Register"),
    ("cpuid", "Processor information"),
];

/// The 26 documented fs-segment offsets on 32-bit Windows.
const FS_OFFSET_EXPLANATIONS: [(u32, &str); 26] = [
    (0x0, "Current Structured Exception Handling (SEH) frame"),
    (0x4, "Stack Base / Bottom of stack (high address)"),
    (0x8, "Stack Limit / Ceiling of stack (low address)"),
    (0xC, "SubSystemTib"),
    (0x10, "Fiber data"),
    (0x14, "Arbitrary data slot"),
    (0x18, "Linear address of TEB"),
    (0x1C, "Environment Pointer"),
    (
        0x20,
        "Process ID (in some Windows distributions this field is used as DebugContext)",
    ),
    (0x24, "Current thread ID"),
    (0x28, "Active RPC Handle"),
    (0x2C, "Linear address of the thread-local storage array"),
    (0x30, "Linear address of Process Environment Block (PEB)"),
    (0x34, "Last error number"),
    (0x38, "Count of owned critical sections"),
    (0x3C, "Address of CSR Client Thread"),
    (0x40, "Win32 Thread Information"),
    (
        0x44,
        "Win32 client information (NT), user32 private data (Wine)",
    ),
    (0xC0, "Pointer to FastSysCall in Wow64"),
    (0xC4, "Current Locale"),
    (0xC8, "FP Software Status Register"),
    (0xCC, "Reserved for OS (NT), kernel32 private data (Wine)"),
    (0x1A4, "Exception code"),
    (0x1A8, "Activation context stack"),
    (0x6E8, "Real Process ID"),
    (0x6EC, "Real Thread ID"),
];

/// Explanation lookup for watched mnemonics and fs-segment offsets.
#[derive(Debug, Clone)]
pub struct AugmentationTable {
    mnemonic_explanations: BTreeMap<&'static str, &'static str>,
    segment_offsets: BTreeMap<(Seg, u32), &'static str>,
}

impl Default for AugmentationTable {
    fn default() -> Self {
        AugmentationTable {
            mnemonic_explanations: MNEMONIC_EXPLANATIONS.into_iter().collect(),
            segment_offsets: FS_OFFSET_EXPLANATIONS
                .into_iter()
                .map(|(off, text)| ((Seg::Fs, off), text))
                .collect(),
        }
    }
}

impl AugmentationTable {
    pub fn mnemonic_count(&self) -> usize {
        self.mnemonic_explanations.len()
    }

    pub fn segment_offset_count(&self) -> usize {
        self.segment_offsets.len()
    }

    pub fn explain_mnemonic(&self, mnemonic: &str) -> Option<&'static str> {
        self.mnemonic_explanations.get(mnemonic).copied()
    }

    pub fn explain_segment_offset(&self, seg: Seg, offset: u32) -> Option<&'static str> {
        self.segment_offsets.get(&(seg, offset)).copied()
    }
}

/// Offset rendering follows the OS-manual convention: uppercase hex digits
/// with a trailing `h` (30h, Ch, 1A4h).
pub fn format_offset(offset: u32) -> String {
    format!("{offset:X}h")
}

/// One feature per instruction whose mnemonic is in the table.
///
/// `int` additionally carries its interrupt number in the rendered line
/// ("int 3", "int 2Dh") because the number is decisive evidence.
pub fn scan_uncommon_mnemonics(block: &BasicBlock, table: &AugmentationTable) -> Vec<Feature> {
    let mut features = Vec::new();
    for ins in &block.instructions {
        let Some(explanation) = table.explain_mnemonic(ins.mnemonic) else {
            continue;
        };
        let rendered_mnemonic = if ins.mnemonic == "int" {
            let number = ins
                .operands
                .first()
                .and_then(Operand::as_immediate)
                .unwrap_or(0) as u32;
            if number < 10 {
                format!("int {number}")
            } else {
                format!("int {}", format_offset(number))
            }
        } else {
            ins.mnemonic.to_string()
        };
        features.push(Feature::new(
            FeatureKind::UncommonIns,
            format!("Uncommon INS: {rendered_mnemonic} ({explanation})"),
            block.id,
            ins.address,
        ));
    }
    features
}

/// One feature per fs/gs-prefixed memory operand with a constant
/// displacement. Offsets missing from the table render as "(unknown field)"
/// rather than being dropped.
pub fn scan_segment_access(block: &BasicBlock, table: &AugmentationTable) -> Vec<Feature> {
    let mut features = Vec::new();
    for ins in &block.instructions {
        for op in &ins.operands {
            let Operand::Memory(mem) = op else { continue };
            let Some(seg @ (Seg::Fs | Seg::Gs)) = mem.segment_prefix else {
                continue;
            };
            let Some(disp) = mem.displacement else {
                continue;
            };
            let offset = disp as u32;
            let explanation = table
                .explain_segment_offset(seg, offset)
                .unwrap_or("unknown field");
            features.push(Feature::new(
                FeatureKind::SegmentAccess,
                format!(
                    "Segment Register Access: {}:{} ({explanation})",
                    seg.name(),
                    format_offset(offset)
                ),
                block.id,
                ins.address,
            ));
        }
    }
    features
}
