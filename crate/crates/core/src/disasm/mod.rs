//! x86-32 decoding, function recovery, CFG construction, and backward
//! register tracing.

mod cfg;
mod dataflow;
mod decoder;

pub use cfg::{
    build_cfg, disassemble_function, discover_functions, has_single_block_loop, DisasmError,
    FunctionDisassembly,
};
pub use dataflow::{trace_register_back, DataFlowTrace, ValueSource};
pub use decoder::decode_one;

use std::collections::BTreeMap;

use crate::Va;

/// The eight 32-bit general-purpose registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reg {
    Eax,
    Ecx,
    Edx,
    Ebx,
    Esp,
    Ebp,
    Esi,
    Edi,
}

impl Reg {
    pub fn from_index(i: u8) -> Reg {
        use Reg::*;
        [Eax, Ecx, Edx, Ebx, Esp, Ebp, Esi, Edi][(i & 7) as usize]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self, width: Width, high: bool) -> &'static str {
        const DWORD: [&str; 8] = ["eax", "ecx", "edx", "ebx", "esp", "ebp", "esi", "edi"];
        const WORD: [&str; 8] = ["ax", "cx", "dx", "bx", "sp", "bp", "si", "di"];
        const LOW: [&str; 8] = ["al", "cl", "dl", "bl", "spl", "bpl", "sil", "dil"];
        const HIGH: [&str; 8] = ["ah", "ch", "dh", "bh", "?", "?", "?", "?"];
        match (width, high) {
            (Width::Dword, _) => DWORD[self.index()],
            (Width::Word, _) => WORD[self.index()],
            (Width::Byte, false) => LOW[self.index()],
            (Width::Byte, true) => HIGH[self.index()],
        }
    }
}

/// Segment override prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Seg {
    Es,
    Cs,
    Ss,
    Ds,
    Fs,
    Gs,
}

impl Seg {
    pub fn name(self) -> &'static str {
        match self {
            Seg::Es => "es",
            Seg::Cs => "cs",
            Seg::Ss => "ss",
            Seg::Ds => "ds",
            Seg::Fs => "fs",
            Seg::Gs => "gs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Width {
    Byte,
    Word,
    Dword,
}

impl Width {
    pub fn bytes(self) -> u32 {
        match self {
            Width::Byte => 1,
            Width::Word => 2,
            Width::Dword => 4,
        }
    }
}

/// Register operand; `high` marks ah/ch/dh/bh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegOperand {
    pub reg: Reg,
    pub width: Width,
    pub high: bool,
}

impl RegOperand {
    pub fn dword(reg: Reg) -> Self {
        RegOperand {
            reg,
            width: Width::Dword,
            high: false,
        }
    }
}

/// Memory operand: `seg:[base + index*scale + disp]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemOperand {
    pub base: Option<Reg>,
    pub index: Option<(Reg, u8)>,
    pub displacement: Option<i32>,
    pub segment_prefix: Option<Seg>,
    pub width: Width,
}

impl MemOperand {
    /// Absolute address for `[disp32]`-only operands.
    pub fn absolute(&self) -> Option<Va> {
        if self.base.is_none() && self.index.is_none() {
            self.displacement.map(|d| d as u32)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    Register(RegOperand),
    Immediate { value: i64, width: Width },
    Memory(MemOperand),
}

impl Operand {
    pub fn as_register(&self) -> Option<RegOperand> {
        match self {
            Operand::Register(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_memory(&self) -> Option<MemOperand> {
        match self {
            Operand::Memory(m) => Some(*m),
            _ => None,
        }
    }

    pub fn as_immediate(&self) -> Option<i64> {
        match self {
            Operand::Immediate { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// Control-transfer classification, resolved at decode time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Sequential,
    Jump(Va),
    CondJump(Va),
    JumpIndirect,
    Call(Va),
    CallIndirect,
    Ret,
}

impl Flow {
    /// Does this instruction end a basic block?
    pub fn is_terminator(self) -> bool {
        !matches!(self, Flow::Sequential)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepPrefix {
    Rep,
    Repne,
}

/// One decoded instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub address: Va,
    pub length: u8,
    pub mnemonic: &'static str,
    pub operands: Vec<Operand>,
    pub raw_bytes: Vec<u8>,
    pub flow: Flow,
    pub rep: Option<RepPrefix>,
}

impl Instruction {
    pub fn next_address(&self) -> Va {
        self.address.wrapping_add(self.length as u32)
    }

    pub fn is_call(&self) -> bool {
        matches!(self.flow, Flow::Call(_) | Flow::CallIndirect)
    }
}

/// Identifies a block by owning function entry and start address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId {
    pub function_entry: Va,
    pub start: Va,
}

#[derive(Debug, Clone)]
pub struct BasicBlock {
    pub id: BlockId,
    pub instructions: Vec<Instruction>,
    pub successors: Vec<Va>,
}

impl BasicBlock {
    pub fn start(&self) -> Va {
        self.id.start
    }

    pub fn last(&self) -> &Instruction {
        self.instructions.last().expect("blocks are nonempty")
    }
}

#[derive(Debug, Clone)]
pub struct ControlFlowGraph {
    pub function_entry: Va,
    pub blocks: BTreeMap<Va, BasicBlock>,
}

impl ControlFlowGraph {
    pub fn block_containing(&self, va: Va) -> Option<&BasicBlock> {
        self.blocks
            .values()
            .find(|b| b.instructions.iter().any(|i| i.address == va))
    }

    /// Blocks whose successor list contains `start`.
    pub fn predecessors(&self, start: Va) -> Vec<Va> {
        self.blocks
            .values()
            .filter(|b| b.successors.contains(&start))
            .map(|b| b.start())
            .collect()
    }

    pub fn instruction_at(&self, va: Va) -> Option<&Instruction> {
        self.blocks
            .values()
            .flat_map(|b| b.instructions.iter())
            .find(|i| i.address == va)
    }
}

/// Why a byte sequence failed to decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeErrorKind {
    Truncated,
    UnknownOpcode(u8),
    UnknownExtendedOpcode(u8),
    UnsupportedEncoding,
}
