//! Table-driven x86-32 instruction decoder.
//!
//! Covers the practical subset this pipeline needs: data movement, ALU ops,
//! stack ops, control flow, string ops, and the anti-analysis mnemonics
//! (pushf/popf family, int, icebp, bts, rdtsc, sidt/sgdt/sldt/str, cpuid).
//! The decoder is the internal contract for everything downstream; any
//! conformant decoder can replace it.

use crate::Va;

use super::{
    DecodeErrorKind, Flow, Instruction, MemOperand, Operand, Reg, RegOperand, RepPrefix, Seg,
    Width,
};

const MAX_INSTRUCTION_LEN: usize = 15;

const JCC_NAMES: [&str; 16] = [
    "jo", "jno", "jb", "jae", "jz", "jnz", "jbe", "ja", "js", "jns", "jp", "jnp", "jl", "jge",
    "jle", "jg",
];
const SETCC_NAMES: [&str; 16] = [
    "seto", "setno", "setb", "setae", "setz", "setnz", "setbe", "seta", "sets", "setns", "setp",
    "setnp", "setl", "setge", "setle", "setg",
];
const CMOVCC_NAMES: [&str; 16] = [
    "cmovo", "cmovno", "cmovb", "cmovae", "cmovz", "cmovnz", "cmovbe", "cmova", "cmovs", "cmovns",
    "cmovp", "cmovnp", "cmovl", "cmovge", "cmovle", "cmovg",
];
const GRP1_NAMES: [&str; 8] = ["add", "or", "adc", "sbb", "and", "sub", "xor", "cmp"];
const GRP2_NAMES: [&str; 8] = ["rol", "ror", "rcl", "rcr", "shl", "shr", "sal", "sar"];
const GRP3_NAMES: [&str; 8] = ["test", "test", "not", "neg", "mul", "imul", "div", "idiv"];

/// Decode one instruction from `bytes` (which start at virtual address `va`).
pub fn decode_one(bytes: &[u8], va: Va) -> Result<Instruction, DecodeErrorKind> {
    Cursor::new(bytes, va).decode()
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    va: Va,
    seg: Option<Seg>,
    opsize16: bool,
    rep: Option<RepPrefix>,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8], va: Va) -> Self {
        Cursor {
            bytes,
            pos: 0,
            va,
            seg: None,
            opsize16: false,
            rep: None,
        }
    }

    fn u8(&mut self) -> Result<u8, DecodeErrorKind> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or(DecodeErrorKind::Truncated)?;
        self.pos += 1;
        if self.pos > MAX_INSTRUCTION_LEN {
            return Err(DecodeErrorKind::UnsupportedEncoding);
        }
        Ok(b)
    }

    fn u16(&mut self) -> Result<u16, DecodeErrorKind> {
        Ok(u16::from_le_bytes([self.u8()?, self.u8()?]))
    }

    fn u32(&mut self) -> Result<u32, DecodeErrorKind> {
        Ok(u32::from_le_bytes([
            self.u8()?,
            self.u8()?,
            self.u8()?,
            self.u8()?,
        ]))
    }

    fn op_width(&self) -> Width {
        if self.opsize16 {
            Width::Word
        } else {
            Width::Dword
        }
    }

    /// Immediate of the current operand size, sign-extended.
    fn imm_opsize(&mut self) -> Result<i64, DecodeErrorKind> {
        Ok(if self.opsize16 {
            self.u16()? as i16 as i64
        } else {
            self.u32()? as i32 as i64
        })
    }

    fn reg_operand(&self, index: u8, width: Width) -> Operand {
        let (reg, high) = match width {
            Width::Byte => (Reg::from_index(index & 3), index >= 4),
            _ => (Reg::from_index(index), false),
        };
        Operand::Register(RegOperand { reg, width, high })
    }

    /// Decode ModRM (+ SIB + displacement); returns `(reg field, r/m operand)`.
    fn modrm(&mut self, width: Width) -> Result<(u8, Operand), DecodeErrorKind> {
        let modrm = self.u8()?;
        let mode = modrm >> 6;
        let reg = (modrm >> 3) & 7;
        let rm = modrm & 7;

        if mode == 3 {
            return Ok((reg, self.reg_operand(rm, width)));
        }

        let mut base = None;
        let mut index = None;
        let mut disp: Option<i32> = None;

        if rm == 4 {
            let sib = self.u8()?;
            let scale = 1u8 << (sib >> 6);
            let idx = (sib >> 3) & 7;
            let b = sib & 7;
            if idx != 4 {
                index = Some((Reg::from_index(idx), scale));
            }
            if b == 5 && mode == 0 {
                disp = Some(self.u32()? as i32);
            } else {
                base = Some(Reg::from_index(b));
            }
        } else if rm == 5 && mode == 0 {
            disp = Some(self.u32()? as i32);
        } else {
            base = Some(Reg::from_index(rm));
        }

        match mode {
            1 => disp = Some(self.u8()? as i8 as i32),
            2 => disp = Some(self.u32()? as i32),
            _ => {}
        }

        Ok((
            reg,
            Operand::Memory(MemOperand {
                base,
                index,
                displacement: disp,
                segment_prefix: self.seg,
                width,
            }),
        ))
    }

    fn rel8_target(&mut self) -> Result<Va, DecodeErrorKind> {
        let rel = self.u8()? as i8 as i32;
        Ok(self.end_va().wrapping_add(rel as u32))
    }

    fn rel32_target(&mut self) -> Result<Va, DecodeErrorKind> {
        let rel = self.u32()? as i32;
        Ok(self.end_va().wrapping_add(rel as u32))
    }

    /// Address of the byte after the bytes consumed so far. Only valid for
    /// rel targets, which are the final bytes of their instruction.
    fn end_va(&self) -> Va {
        self.va.wrapping_add(self.pos as u32)
    }

    fn finish(
        self,
        mnemonic: &'static str,
        operands: Vec<Operand>,
        flow: Flow,
    ) -> Result<Instruction, DecodeErrorKind> {
        Ok(Instruction {
            address: self.va,
            length: self.pos as u8,
            mnemonic,
            operands,
            raw_bytes: self.bytes[..self.pos].to_vec(),
            flow,
            rep: self.rep,
        })
    }

    fn simple(self, mnemonic: &'static str) -> Result<Instruction, DecodeErrorKind> {
        self.finish(mnemonic, vec![], Flow::Sequential)
    }

    fn decode(mut self) -> Result<Instruction, DecodeErrorKind> {
        loop {
            let b = self.u8()?;
            match b {
                0x26 => self.seg = Some(Seg::Es),
                0x2E => self.seg = Some(Seg::Cs),
                0x36 => self.seg = Some(Seg::Ss),
                0x3E => self.seg = Some(Seg::Ds),
                0x64 => self.seg = Some(Seg::Fs),
                0x65 => self.seg = Some(Seg::Gs),
                0x66 => self.opsize16 = true,
                0xF0 => {} // lock
                0xF2 => self.rep = Some(RepPrefix::Repne),
                0xF3 => self.rep = Some(RepPrefix::Rep),
                0x67 => return Err(DecodeErrorKind::UnsupportedEncoding),
                _ => return self.opcode(b),
            }
        }
    }

    fn opcode(mut self, op: u8) -> Result<Instruction, DecodeErrorKind> {
        // ALU family: add/or/adc/sbb/and/sub/xor/cmp share a 6-opcode layout
        // in 0x00-0x3F (forms 6 and 7 of each 8-block are other opcodes).
        if op < 0x40 && (op & 7) < 6 {
            return self.alu(op);
        }

        match op {
            0x0F => {
                let op2 = self.u8()?;
                self.extended(op2)
            }

            0x40..=0x47 => {
                let r = self.reg_operand(op - 0x40, self.op_width());
                self.finish("inc", vec![r], Flow::Sequential)
            }
            0x48..=0x4F => {
                let r = self.reg_operand(op - 0x48, self.op_width());
                self.finish("dec", vec![r], Flow::Sequential)
            }
            0x50..=0x57 => {
                let r = self.reg_operand(op - 0x50, Width::Dword);
                self.finish("push", vec![r], Flow::Sequential)
            }
            0x58..=0x5F => {
                let r = self.reg_operand(op - 0x58, Width::Dword);
                self.finish("pop", vec![r], Flow::Sequential)
            }
            0x60 => self.simple("pushad"),
            0x61 => self.simple("popad"),
            0x68 => {
                let value = self.imm_opsize()?;
                let width = self.op_width();
                self.finish("push", vec![Operand::Immediate { value, width }], Flow::Sequential)
            }
            0x69 => {
                let width = self.op_width();
                let (reg, rm) = self.modrm(width)?;
                let value = self.imm_opsize()?;
                let dst = self.reg_operand(reg, width);
                self.finish(
                    "imul",
                    vec![dst, rm, Operand::Immediate { value, width }],
                    Flow::Sequential,
                )
            }
            0x6A => {
                let value = self.u8()? as i8 as i64;
                self.finish(
                    "push",
                    vec![Operand::Immediate {
                        value,
                        width: Width::Byte,
                    }],
                    Flow::Sequential,
                )
            }
            0x6B => {
                let width = self.op_width();
                let (reg, rm) = self.modrm(width)?;
                let value = self.u8()? as i8 as i64;
                let dst = self.reg_operand(reg, width);
                self.finish(
                    "imul",
                    vec![dst, rm, Operand::Immediate { value, width: Width::Byte }],
                    Flow::Sequential,
                )
            }

            0x70..=0x7F => {
                let target = self.rel8_target()?;
                self.finish(JCC_NAMES[(op & 0xF) as usize], vec![], Flow::CondJump(target))
            }

            0x80 | 0x82 => {
                let (reg, rm) = self.modrm(Width::Byte)?;
                let value = self.u8()? as i8 as i64;
                self.finish(
                    GRP1_NAMES[reg as usize],
                    vec![rm, Operand::Immediate { value, width: Width::Byte }],
                    Flow::Sequential,
                )
            }
            0x81 => {
                let width = self.op_width();
                let (reg, rm) = self.modrm(width)?;
                let value = self.imm_opsize()?;
                self.finish(
                    GRP1_NAMES[reg as usize],
                    vec![rm, Operand::Immediate { value, width }],
                    Flow::Sequential,
                )
            }
            0x83 => {
                let width = self.op_width();
                let (reg, rm) = self.modrm(width)?;
                let value = self.u8()? as i8 as i64;
                self.finish(
                    GRP1_NAMES[reg as usize],
                    vec![rm, Operand::Immediate { value, width: Width::Byte }],
                    Flow::Sequential,
                )
            }

            0x84 | 0x85 => {
                let width = if op == 0x84 { Width::Byte } else { self.op_width() };
                let (reg, rm) = self.modrm(width)?;
                let r = self.reg_operand(reg, width);
                self.finish("test", vec![rm, r], Flow::Sequential)
            }
            0x86 | 0x87 => {
                let width = if op == 0x86 { Width::Byte } else { self.op_width() };
                let (reg, rm) = self.modrm(width)?;
                let r = self.reg_operand(reg, width);
                self.finish("xchg", vec![rm, r], Flow::Sequential)
            }
            0x88 | 0x89 => {
                let width = if op == 0x88 { Width::Byte } else { self.op_width() };
                let (reg, rm) = self.modrm(width)?;
                let r = self.reg_operand(reg, width);
                self.finish("mov", vec![rm, r], Flow::Sequential)
            }
            0x8A | 0x8B => {
                let width = if op == 0x8A { Width::Byte } else { self.op_width() };
                let (reg, rm) = self.modrm(width)?;
                let r = self.reg_operand(reg, width);
                self.finish("mov", vec![r, rm], Flow::Sequential)
            }
            0x8D => {
                let width = self.op_width();
                let (reg, rm) = self.modrm(width)?;
                if !matches!(rm, Operand::Memory(_)) {
                    return Err(DecodeErrorKind::UnsupportedEncoding);
                }
                let r = self.reg_operand(reg, width);
                self.finish("lea", vec![r, rm], Flow::Sequential)
            }
            0x8F => {
                let (reg, rm) = self.modrm(Width::Dword)?;
                if reg != 0 {
                    return Err(DecodeErrorKind::UnknownOpcode(op));
                }
                self.finish("pop", vec![rm], Flow::Sequential)
            }
            0x90 => self.simple("nop"),
            0x9C => {
                if self.opsize16 {
                    self.simple("pushf")
                } else {
                    self.simple("pushfd")
                }
            }
            0x9D => {
                if self.opsize16 {
                    self.simple("popf")
                } else {
                    self.simple("popfd")
                }
            }

            0xA0..=0xA3 => {
                let width = if op & 1 == 0 { Width::Byte } else { self.op_width() };
                let addr = self.u32()? as i32;
                let mem = Operand::Memory(MemOperand {
                    base: None,
                    index: None,
                    displacement: Some(addr),
                    segment_prefix: self.seg,
                    width,
                });
                let acc = self.reg_operand(0, width);
                let ops = if op < 0xA2 { vec![acc, mem] } else { vec![mem, acc] };
                self.finish("mov", ops, Flow::Sequential)
            }
            0xA4 => self.simple("movsb"),
            0xA5 => {
                if self.opsize16 {
                    self.simple("movsw")
                } else {
                    self.simple("movsd")
                }
            }
            0xA6 => self.simple("cmpsb"),
            0xA7 => self.simple("cmpsd"),
            0xA8 => {
                let value = self.u8()? as i64;
                let acc = self.reg_operand(0, Width::Byte);
                self.finish(
                    "test",
                    vec![acc, Operand::Immediate { value, width: Width::Byte }],
                    Flow::Sequential,
                )
            }
            0xA9 => {
                let width = self.op_width();
                let value = self.imm_opsize()?;
                let acc = self.reg_operand(0, width);
                self.finish("test", vec![acc, Operand::Immediate { value, width }], Flow::Sequential)
            }
            0xAA => self.simple("stosb"),
            0xAB => {
                if self.opsize16 {
                    self.simple("stosw")
                } else {
                    self.simple("stosd")
                }
            }
            0xAC => self.simple("lodsb"),
            0xAD => self.simple("lodsd"),
            0xAE => self.simple("scasb"),
            0xAF => self.simple("scasd"),

            0xB0..=0xB7 => {
                let value = self.u8()? as i64;
                let r = self.reg_operand(op - 0xB0, Width::Byte);
                self.finish(
                    "mov",
                    vec![r, Operand::Immediate { value, width: Width::Byte }],
                    Flow::Sequential,
                )
            }
            0xB8..=0xBF => {
                let width = self.op_width();
                let value = self.imm_opsize()?;
                let r = self.reg_operand(op - 0xB8, width);
                self.finish("mov", vec![r, Operand::Immediate { value, width }], Flow::Sequential)
            }

            0xC0 | 0xC1 => {
                let width = if op == 0xC0 { Width::Byte } else { self.op_width() };
                let (reg, rm) = self.modrm(width)?;
                let value = self.u8()? as i64;
                self.finish(
                    GRP2_NAMES[reg as usize],
                    vec![rm, Operand::Immediate { value, width: Width::Byte }],
                    Flow::Sequential,
                )
            }
            0xC2 => {
                let n = self.u16()? as i64;
                self.finish(
                    "ret",
                    vec![Operand::Immediate { value: n, width: Width::Word }],
                    Flow::Ret,
                )
            }
            0xC3 => self.finish("ret", vec![], Flow::Ret),
            0xC6 => {
                let (reg, rm) = self.modrm(Width::Byte)?;
                if reg != 0 {
                    return Err(DecodeErrorKind::UnknownOpcode(op));
                }
                let value = self.u8()? as i64;
                self.finish(
                    "mov",
                    vec![rm, Operand::Immediate { value, width: Width::Byte }],
                    Flow::Sequential,
                )
            }
            0xC7 => {
                let width = self.op_width();
                let (reg, rm) = self.modrm(width)?;
                if reg != 0 {
                    return Err(DecodeErrorKind::UnknownOpcode(op));
                }
                let value = self.imm_opsize()?;
                self.finish("mov", vec![rm, Operand::Immediate { value, width }], Flow::Sequential)
            }
            0xC9 => self.simple("leave"),
            0xCC => self.finish(
                "int",
                vec![Operand::Immediate { value: 3, width: Width::Byte }],
                Flow::Sequential,
            ),
            0xCD => {
                let value = self.u8()? as i64;
                self.finish(
                    "int",
                    vec![Operand::Immediate { value, width: Width::Byte }],
                    Flow::Sequential,
                )
            }
            0xCF => self.finish("iretd", vec![], Flow::Ret),

            0xD0..=0xD3 => {
                let width = if op & 1 == 0 { Width::Byte } else { self.op_width() };
                let (reg, rm) = self.modrm(width)?;
                let count = if op < 0xD2 {
                    Operand::Immediate { value: 1, width: Width::Byte }
                } else {
                    self.reg_operand(1, Width::Byte) // cl
                };
                self.finish(GRP2_NAMES[reg as usize], vec![rm, count], Flow::Sequential)
            }

            0xE0 => {
                let target = self.rel8_target()?;
                self.finish("loopne", vec![], Flow::CondJump(target))
            }
            0xE1 => {
                let target = self.rel8_target()?;
                self.finish("loope", vec![], Flow::CondJump(target))
            }
            0xE2 => {
                let target = self.rel8_target()?;
                self.finish("loop", vec![], Flow::CondJump(target))
            }
            0xE3 => {
                let target = self.rel8_target()?;
                self.finish("jecxz", vec![], Flow::CondJump(target))
            }
            0xE8 => {
                let target = self.rel32_target()?;
                self.finish("call", vec![], Flow::Call(target))
            }
            0xE9 => {
                let target = self.rel32_target()?;
                self.finish("jmp", vec![], Flow::Jump(target))
            }
            0xEB => {
                let target = self.rel8_target()?;
                self.finish("jmp", vec![], Flow::Jump(target))
            }

            0xF1 => self.simple("icebp"),
            0xF4 => self.finish("hlt", vec![], Flow::Ret),
            0xF5 => self.simple("cmc"),
            0xF6 | 0xF7 => {
                let width = if op == 0xF6 { Width::Byte } else { self.op_width() };
                let (reg, rm) = self.modrm(width)?;
                let mnemonic = GRP3_NAMES[reg as usize];
                if reg < 2 {
                    let value = if width == Width::Byte {
                        self.u8()? as i64
                    } else {
                        self.imm_opsize()?
                    };
                    self.finish("test", vec![rm, Operand::Immediate { value, width }], Flow::Sequential)
                } else {
                    self.finish(mnemonic, vec![rm], Flow::Sequential)
                }
            }
            0xF8 => self.simple("clc"),
            0xF9 => self.simple("stc"),
            0xFA => self.simple("cli"),
            0xFB => self.simple("sti"),
            0xFC => self.simple("cld"),
            0xFD => self.simple("std"),
            0xFE => {
                let (reg, rm) = self.modrm(Width::Byte)?;
                match reg {
                    0 => self.finish("inc", vec![rm], Flow::Sequential),
                    1 => self.finish("dec", vec![rm], Flow::Sequential),
                    _ => Err(DecodeErrorKind::UnknownOpcode(op)),
                }
            }
            0xFF => {
                let (reg, rm) = self.modrm(Width::Dword)?;
                match reg {
                    0 => self.finish("inc", vec![rm], Flow::Sequential),
                    1 => self.finish("dec", vec![rm], Flow::Sequential),
                    2 => self.finish("call", vec![rm], Flow::CallIndirect),
                    4 => self.finish("jmp", vec![rm], Flow::JumpIndirect),
                    6 => self.finish("push", vec![rm], Flow::Sequential),
                    _ => Err(DecodeErrorKind::UnknownOpcode(op)),
                }
            }

            _ => Err(DecodeErrorKind::UnknownOpcode(op)),
        }
    }

    /// The `add/or/adc/sbb/and/sub/xor/cmp` block: opcodes 0x00-0x3D with a
    /// shared layout keyed on bits 3-5.
    fn alu(mut self, op: u8) -> Result<Instruction, DecodeErrorKind> {
        let mnemonic = GRP1_NAMES[((op >> 3) & 7) as usize];
        match op & 7 {
            0 | 1 => {
                let width = if op & 7 == 0 { Width::Byte } else { self.op_width() };
                let (reg, rm) = self.modrm(width)?;
                let r = self.reg_operand(reg, width);
                self.finish(mnemonic, vec![rm, r], Flow::Sequential)
            }
            2 | 3 => {
                let width = if op & 7 == 2 { Width::Byte } else { self.op_width() };
                let (reg, rm) = self.modrm(width)?;
                let r = self.reg_operand(reg, width);
                self.finish(mnemonic, vec![r, rm], Flow::Sequential)
            }
            4 => {
                let value = self.u8()? as i64;
                let acc = self.reg_operand(0, Width::Byte);
                self.finish(
                    mnemonic,
                    vec![acc, Operand::Immediate { value, width: Width::Byte }],
                    Flow::Sequential,
                )
            }
            _ => {
                let width = self.op_width();
                let value = self.imm_opsize()?;
                let acc = self.reg_operand(0, width);
                self.finish(
                    mnemonic,
                    vec![acc, Operand::Immediate { value, width }],
                    Flow::Sequential,
                )
            }
        }
    }

    fn extended(mut self, op2: u8) -> Result<Instruction, DecodeErrorKind> {
        match op2 {
            0x00 => {
                let (reg, rm) = self.modrm(self.op_width())?;
                match reg {
                    0 => self.finish("sldt", vec![rm], Flow::Sequential),
                    1 => self.finish("str", vec![rm], Flow::Sequential),
                    _ => Err(DecodeErrorKind::UnknownExtendedOpcode(op2)),
                }
            }
            0x01 => {
                let (reg, rm) = self.modrm(Width::Dword)?;
                match reg {
                    0 => self.finish("sgdt", vec![rm], Flow::Sequential),
                    1 => self.finish("sidt", vec![rm], Flow::Sequential),
                    _ => Err(DecodeErrorKind::UnknownExtendedOpcode(op2)),
                }
            }
            0x31 => self.simple("rdtsc"),
            0x40..=0x4F => {
                let width = self.op_width();
                let (reg, rm) = self.modrm(width)?;
                let r = self.reg_operand(reg, width);
                self.finish(CMOVCC_NAMES[(op2 & 0xF) as usize], vec![r, rm], Flow::Sequential)
            }
            0x80..=0x8F => {
                let target = self.rel32_target()?;
                self.finish(JCC_NAMES[(op2 & 0xF) as usize], vec![], Flow::CondJump(target))
            }
            0x90..=0x9F => {
                let (_, rm) = self.modrm(Width::Byte)?;
                self.finish(SETCC_NAMES[(op2 & 0xF) as usize], vec![rm], Flow::Sequential)
            }
            0xA2 => self.simple("cpuid"),
            0xA3 => {
                let width = self.op_width();
                let (reg, rm) = self.modrm(width)?;
                let r = self.reg_operand(reg, width);
                self.finish("bt", vec![rm, r], Flow::Sequential)
            }
            0xAB => {
                let width = self.op_width();
                let (reg, rm) = self.modrm(width)?;
                let r = self.reg_operand(reg, width);
                self.finish("bts", vec![rm, r], Flow::Sequential)
            }
            0xAF => {
                let width = self.op_width();
                let (reg, rm) = self.modrm(width)?;
                let r = self.reg_operand(reg, width);
                self.finish("imul", vec![r, rm], Flow::Sequential)
            }
            0xB3 => {
                let width = self.op_width();
                let (reg, rm) = self.modrm(width)?;
                let r = self.reg_operand(reg, width);
                self.finish("btr", vec![rm, r], Flow::Sequential)
            }
            0xB6 | 0xB7 => {
                let src_width = if op2 == 0xB6 { Width::Byte } else { Width::Word };
                let (reg, rm) = self.modrm(src_width)?;
                let r = self.reg_operand(reg, Width::Dword);
                self.finish("movzx", vec![r, rm], Flow::Sequential)
            }
            0xBA => {
                let width = self.op_width();
                let (reg, rm) = self.modrm(width)?;
                let value = self.u8()? as i64;
                let name = match reg {
                    4 => "bt",
                    5 => "bts",
                    6 => "btr",
                    7 => "btc",
                    _ => return Err(DecodeErrorKind::UnknownExtendedOpcode(op2)),
                };
                self.finish(
                    name,
                    vec![rm, Operand::Immediate { value, width: Width::Byte }],
                    Flow::Sequential,
                )
            }
            0xBB => {
                let width = self.op_width();
                let (reg, rm) = self.modrm(width)?;
                let r = self.reg_operand(reg, width);
                self.finish("btc", vec![rm, r], Flow::Sequential)
            }
            0xBE | 0xBF => {
                let src_width = if op2 == 0xBE { Width::Byte } else { Width::Word };
                let (reg, rm) = self.modrm(src_width)?;
                let r = self.reg_operand(reg, Width::Dword);
                self.finish("movsx", vec![r, rm], Flow::Sequential)
            }
            0xC8..=0xCF => {
                let r = self.reg_operand(op2 - 0xC8, Width::Dword);
                self.finish("bswap", vec![r], Flow::Sequential)
            }
            _ => Err(DecodeErrorKind::UnknownExtendedOpcode(op2)),
        }
    }
}
