//! Bounded function emulation for encoded and stack-built strings.
//!
//! The interpreter runs one function in isolation: scratch stack, copy-on-
//! write data memory over the image, unknown external state reading as zero,
//! calls skipped with return value 0, and a hard step cap. After the run,
//! written memory is scanned for printable runs.

use std::collections::{BTreeMap, HashMap};

use crate::disasm::{
    ControlFlowGraph, Flow, FunctionDisassembly, Instruction, MemOperand, Operand, Reg,
    RegOperand, Width,
};
use crate::loader::BinaryImage;
use crate::Va;

use super::strings::{EmulationTriggerConfig, RecoveredString, StringEncoding, StringOrigin};
use crate::disasm::BlockId;
use StringEncoding::Ascii;

/// Where the scratch stack starts; exposed so conformance tests can
/// predict the exact memory image.
pub const SCRATCH_STACK_TOP: u32 = 0x002F_F000;

/// Result of one emulation run. Partial results survive a budget overrun.
#[derive(Debug, Clone)]
pub struct EmulationOutcome {
    pub strings: Vec<RecoveredString>,
    pub budget_exceeded: bool,
    pub steps: u64,
    /// Every byte the run wrote, by address.
    pub written_memory: BTreeMap<u32, u8>,
}

/// Execute the function and scan everything it wrote for strings.
pub fn emulate_for_strings(
    cfg: &ControlFlowGraph,
    disasm: &FunctionDisassembly,
    image: &BinaryImage,
    config: &EmulationTriggerConfig,
) -> EmulationOutcome {
    let mut machine = Machine::new(image, cfg, disasm, config.max_steps);
    let budget_exceeded = machine.run();
    let strings = machine.scan_written_strings(config.min_string_length);
    let written_memory = machine
        .writes
        .keys()
        .map(|&addr| (addr, machine.read8(addr)))
        .collect();
    EmulationOutcome {
        strings,
        budget_exceeded,
        steps: machine.steps,
        written_memory,
    }
}

/// Run the interpreter until execution first reaches `site` and report the
/// value of `reg` there. Used to cross-check the static backward trace.
pub fn emulate_register_at(
    cfg: &ControlFlowGraph,
    disasm: &FunctionDisassembly,
    image: &BinaryImage,
    site: Va,
    reg: Reg,
    max_steps: u64,
) -> Option<u32> {
    let mut machine = Machine::new(image, cfg, disasm, max_steps);
    while machine.steps < max_steps {
        if machine.eip == site {
            return Some(machine.regs[reg.index()]);
        }
        let ins = machine.instructions.get(&machine.eip)?.clone();
        machine.steps += 1;
        if !machine.step(&ins) {
            return None;
        }
    }
    None
}

#[derive(Debug, Clone, Copy)]
struct WriteRecord {
    step: u64,
    block: Va,
    ins_addr: Va,
}

struct Machine<'a> {
    image: &'a BinaryImage,
    function_entry: Va,
    instructions: &'a BTreeMap<Va, Instruction>,
    block_of: HashMap<Va, Va>,
    regs: [u32; 8],
    zf: bool,
    sf: bool,
    cf: bool,
    of: bool,
    pf: bool,
    df: bool,
    overlay: HashMap<u32, u8>,
    writes: HashMap<u32, WriteRecord>,
    eip: Va,
    steps: u64,
    max_steps: u64,
}

impl<'a> Machine<'a> {
    fn new(
        image: &'a BinaryImage,
        cfg: &ControlFlowGraph,
        disasm: &'a FunctionDisassembly,
        max_steps: u64,
    ) -> Self {
        let mut block_of = HashMap::new();
        for block in cfg.blocks.values() {
            for ins in &block.instructions {
                block_of.insert(ins.address, block.start());
            }
        }
        let mut regs = [0u32; 8];
        regs[Reg::Esp.index()] = SCRATCH_STACK_TOP;
        regs[Reg::Ebp.index()] = SCRATCH_STACK_TOP;
        Machine {
            image,
            function_entry: cfg.function_entry,
            instructions: &disasm.instructions,
            block_of,
            regs,
            zf: false,
            sf: false,
            cf: false,
            of: false,
            pf: false,
            df: false,
            overlay: HashMap::new(),
            writes: HashMap::new(),
            eip: cfg.function_entry,
            steps: 0,
            max_steps,
        }
    }

    /// Run until ret, departure from the function, or the step cap.
    /// Returns true when the cap was hit.
    fn run(&mut self) -> bool {
        while self.steps < self.max_steps {
            let Some(ins) = self.instructions.get(&self.eip) else {
                return false;
            };
            self.steps += 1;
            if !self.step(ins) {
                return false;
            }
        }
        true
    }

    // ---- memory ----

    fn read8(&self, addr: u32) -> u8 {
        if let Some(&b) = self.overlay.get(&addr) {
            return b;
        }
        self.image.read_byte(addr).unwrap_or(0)
    }

    fn write8(&mut self, addr: u32, value: u8, ins: &Instruction) {
        self.overlay.insert(addr, value);
        self.writes.insert(
            addr,
            WriteRecord {
                step: self.steps,
                block: self.block_of.get(&ins.address).copied().unwrap_or(self.function_entry),
                ins_addr: ins.address,
            },
        );
    }

    fn read_mem(&self, addr: u32, width: Width) -> u32 {
        let mut v = 0u32;
        for i in 0..width.bytes() {
            v |= (self.read8(addr.wrapping_add(i)) as u32) << (8 * i);
        }
        v
    }

    fn write_mem(&mut self, addr: u32, value: u32, width: Width, ins: &Instruction) {
        for i in 0..width.bytes() {
            self.write8(addr.wrapping_add(i), (value >> (8 * i)) as u8, ins);
        }
    }

    // ---- registers ----

    fn read_reg(&self, r: RegOperand) -> u32 {
        let full = self.regs[r.reg.index()];
        match r.width {
            Width::Dword => full,
            Width::Word => full & 0xFFFF,
            Width::Byte => {
                if r.high {
                    (full >> 8) & 0xFF
                } else {
                    full & 0xFF
                }
            }
        }
    }

    fn write_reg(&mut self, r: RegOperand, value: u32) {
        let slot = &mut self.regs[r.reg.index()];
        match r.width {
            Width::Dword => *slot = value,
            Width::Word => *slot = (*slot & 0xFFFF_0000) | (value & 0xFFFF),
            Width::Byte => {
                if r.high {
                    *slot = (*slot & 0xFFFF_00FF) | ((value & 0xFF) << 8);
                } else {
                    *slot = (*slot & 0xFFFF_FF00) | (value & 0xFF);
                }
            }
        }
    }

    fn effective_address(&self, mem: &MemOperand) -> u32 {
        let mut addr = mem.displacement.unwrap_or(0) as u32;
        if let Some(base) = mem.base {
            addr = addr.wrapping_add(self.regs[base.index()]);
        }
        if let Some((index, scale)) = mem.index {
            addr = addr.wrapping_add(self.regs[index.index()].wrapping_mul(scale as u32));
        }
        addr
    }

    fn value_of(&self, op: &Operand) -> u32 {
        match op {
            Operand::Register(r) => self.read_reg(*r),
            // decode already sign- or zero-extended the immediate; masking by
            // its encoded width here would break sign-extended imm8 forms
            Operand::Immediate { value, .. } => *value as u32,
            Operand::Memory(mem) => self.read_mem(self.effective_address(mem), mem.width),
        }
    }

    fn operand_width(op: &Operand) -> Width {
        match op {
            Operand::Register(r) => r.width,
            Operand::Immediate { width, .. } => *width,
            Operand::Memory(m) => m.width,
        }
    }

    fn write_operand(&mut self, op: &Operand, value: u32, ins: &Instruction) {
        match op {
            Operand::Register(r) => self.write_reg(*r, value),
            Operand::Memory(mem) => {
                let addr = self.effective_address(mem);
                self.write_mem(addr, value, mem.width, ins);
            }
            Operand::Immediate { .. } => {}
        }
    }

    // ---- flags ----

    fn set_logic_flags(&mut self, result: u32, width: Width) {
        let r = mask(result, width);
        self.zf = r == 0;
        self.sf = r & sign_bit(width) != 0;
        self.cf = false;
        self.of = false;
        self.pf = (r as u8).count_ones().is_multiple_of(2);
    }

    fn set_add_flags(&mut self, a: u32, b: u32, result: u64, width: Width) {
        let r = mask(result as u32, width);
        self.zf = r == 0;
        self.sf = r & sign_bit(width) != 0;
        self.cf = result > mask(u32::MAX, width) as u64;
        let sa = a & sign_bit(width) != 0;
        let sb = b & sign_bit(width) != 0;
        let sr = r & sign_bit(width) != 0;
        self.of = sa == sb && sr != sa;
        self.pf = (r as u8).count_ones().is_multiple_of(2);
    }

    fn set_sub_flags(&mut self, a: u32, b: u32, width: Width) {
        let a = mask(a, width);
        let b = mask(b, width);
        let r = mask(a.wrapping_sub(b), width);
        self.zf = r == 0;
        self.sf = r & sign_bit(width) != 0;
        self.cf = b > a;
        let sa = a & sign_bit(width) != 0;
        let sb = b & sign_bit(width) != 0;
        let sr = r & sign_bit(width) != 0;
        self.of = sa != sb && sr != sa;
        self.pf = (r as u8).count_ones().is_multiple_of(2);
    }

    fn condition(&self, cc: &str) -> bool {
        match cc {
            "o" => self.of,
            "no" => !self.of,
            "b" => self.cf,
            "ae" => !self.cf,
            "z" | "e" => self.zf,
            "nz" | "ne" => !self.zf,
            "be" => self.cf || self.zf,
            "a" => !self.cf && !self.zf,
            "s" => self.sf,
            "ns" => !self.sf,
            "p" => self.pf,
            "np" => !self.pf,
            "l" => self.sf != self.of,
            "ge" => self.sf == self.of,
            "le" => self.zf || self.sf != self.of,
            "g" => !self.zf && self.sf == self.of,
            _ => false,
        }
    }

    fn eflags_value(&self) -> u32 {
        let mut f = 0x0000_0002; // reserved bit 1
        if self.cf {
            f |= 1;
        }
        if self.pf {
            f |= 1 << 2;
        }
        if self.zf {
            f |= 1 << 6;
        }
        if self.sf {
            f |= 1 << 7;
        }
        if self.df {
            f |= 1 << 10;
        }
        if self.of {
            f |= 1 << 11;
        }
        f
    }

    fn set_eflags(&mut self, f: u32) {
        self.cf = f & 1 != 0;
        self.pf = f & (1 << 2) != 0;
        self.zf = f & (1 << 6) != 0;
        self.sf = f & (1 << 7) != 0;
        self.df = f & (1 << 10) != 0;
        self.of = f & (1 << 11) != 0;
    }

    fn push32(&mut self, value: u32, ins: &Instruction) {
        let esp = self.regs[Reg::Esp.index()].wrapping_sub(4);
        self.regs[Reg::Esp.index()] = esp;
        self.write_mem(esp, value, Width::Dword, ins);
    }

    fn pop32(&mut self) -> u32 {
        let esp = self.regs[Reg::Esp.index()];
        let v = self.read_mem(esp, Width::Dword);
        self.regs[Reg::Esp.index()] = esp.wrapping_add(4);
        v
    }

    /// Execute one instruction. Returns false to halt.
    fn step(&mut self, ins: &Instruction) -> bool {
        let fallthrough = ins.next_address();
        self.eip = fallthrough;

        match ins.mnemonic {
            "mov" => {
                let v = self.value_of(&ins.operands[1]);
                self.write_operand(&ins.operands[0], v, ins);
            }
            "movzx" => {
                let v = self.value_of(&ins.operands[1]);
                self.write_operand(&ins.operands[0], v, ins);
            }
            "movsx" => {
                let src_width = Self::operand_width(&ins.operands[1]);
                let v = self.value_of(&ins.operands[1]);
                let extended = match src_width {
                    Width::Byte => v as u8 as i8 as i32 as u32,
                    Width::Word => v as u16 as i16 as i32 as u32,
                    Width::Dword => v,
                };
                self.write_operand(&ins.operands[0], extended, ins);
            }
            "lea" => {
                if let Some(Operand::Memory(mem)) = ins.operands.get(1) {
                    let ea = self.effective_address(mem);
                    self.write_operand(&ins.operands[0], ea, ins);
                }
            }
            "add" | "adc" => {
                let width = Self::operand_width(&ins.operands[0]);
                let a = self.value_of(&ins.operands[0]);
                let b = self.value_of(&ins.operands[1]);
                let carry = (ins.mnemonic == "adc" && self.cf) as u64;
                let result = a as u64 + mask(b, width) as u64 + carry;
                self.set_add_flags(a, mask(b, width), result, width);
                self.write_operand(&ins.operands[0], result as u32, ins);
            }
            "sub" | "sbb" => {
                let width = Self::operand_width(&ins.operands[0]);
                let a = self.value_of(&ins.operands[0]);
                let b = self
                    .value_of(&ins.operands[1])
                    .wrapping_add((ins.mnemonic == "sbb" && self.cf) as u32);
                self.set_sub_flags(a, b, width);
                self.write_operand(&ins.operands[0], a.wrapping_sub(b), ins);
            }
            "xor" | "or" | "and" => {
                let width = Self::operand_width(&ins.operands[0]);
                let a = self.value_of(&ins.operands[0]);
                let b = self.value_of(&ins.operands[1]);
                let result = match ins.mnemonic {
                    "xor" => a ^ b,
                    "or" => a | b,
                    _ => a & b,
                };
                self.set_logic_flags(result, width);
                self.write_operand(&ins.operands[0], result, ins);
            }
            "cmp" => {
                let width = Self::operand_width(&ins.operands[0]);
                let a = self.value_of(&ins.operands[0]);
                let b = self.value_of(&ins.operands[1]);
                self.set_sub_flags(a, b, width);
            }
            "test" => {
                let width = Self::operand_width(&ins.operands[0]);
                let a = self.value_of(&ins.operands[0]);
                let b = self.value_of(&ins.operands[1]);
                self.set_logic_flags(a & b, width);
            }
            "inc" | "dec" => {
                let width = Self::operand_width(&ins.operands[0]);
                let a = self.value_of(&ins.operands[0]);
                let r = if ins.mnemonic == "inc" {
                    a.wrapping_add(1)
                } else {
                    a.wrapping_sub(1)
                };
                let saved_cf = self.cf;
                if ins.mnemonic == "inc" {
                    self.set_add_flags(a, 1, a as u64 + 1, width);
                } else {
                    self.set_sub_flags(a, 1, width);
                }
                self.cf = saved_cf;
                self.write_operand(&ins.operands[0], r, ins);
            }
            "neg" => {
                let width = Self::operand_width(&ins.operands[0]);
                let a = self.value_of(&ins.operands[0]);
                self.set_sub_flags(0, a, width);
                self.write_operand(&ins.operands[0], 0u32.wrapping_sub(a), ins);
            }
            "not" => {
                let a = self.value_of(&ins.operands[0]);
                self.write_operand(&ins.operands[0], !a, ins);
            }
            "shl" | "sal" | "shr" | "sar" | "rol" | "ror" => {
                let width = Self::operand_width(&ins.operands[0]);
                let bits = width.bytes() * 8;
                let a = mask(self.value_of(&ins.operands[0]), width);
                let count = self.value_of(&ins.operands[1]) & 31;
                let result = if count == 0 {
                    a
                } else {
                    let c = count % bits;
                    match ins.mnemonic {
                        "shl" | "sal" => a.wrapping_shl(count),
                        "shr" => a.wrapping_shr(count),
                        "sar" => {
                            let signed = sign_extend(a, width);
                            (signed >> count.min(bits - 1)) as u32
                        }
                        "rol" if c == 0 => a,
                        "rol" => (a << c) | (a >> (bits - c)),
                        _ if c == 0 => a,
                        _ => (a >> c) | (a << (bits - c)),
                    }
                };
                if count != 0 {
                    self.set_logic_flags(result, width);
                }
                self.write_operand(&ins.operands[0], result, ins);
            }
            "imul" => match ins.operands.len() {
                1 => {
                    let a = self.regs[Reg::Eax.index()] as i32 as i64;
                    let b = sign_extend(self.value_of(&ins.operands[0]), Self::operand_width(&ins.operands[0])) as i64;
                    let r = a.wrapping_mul(b) as u64;
                    self.regs[Reg::Eax.index()] = r as u32;
                    self.regs[Reg::Edx.index()] = (r >> 32) as u32;
                }
                2 => {
                    let a = self.value_of(&ins.operands[0]);
                    let b = self.value_of(&ins.operands[1]);
                    self.write_operand(&ins.operands[0], a.wrapping_mul(b), ins);
                }
                _ => {
                    let b = self.value_of(&ins.operands[1]);
                    let c = self.value_of(&ins.operands[2]);
                    self.write_operand(&ins.operands[0], b.wrapping_mul(c), ins);
                }
            },
            "mul" => {
                let a = self.regs[Reg::Eax.index()] as u64;
                let b = self.value_of(&ins.operands[0]) as u64;
                let r = a.wrapping_mul(b);
                self.regs[Reg::Eax.index()] = r as u32;
                self.regs[Reg::Edx.index()] = (r >> 32) as u32;
            }
            "div" | "idiv" => {
                let divisor = self.value_of(&ins.operands[0]);
                if divisor == 0 {
                    self.regs[Reg::Eax.index()] = 0;
                    self.regs[Reg::Edx.index()] = 0;
                } else {
                    let dividend = ((self.regs[Reg::Edx.index()] as u64) << 32)
                        | self.regs[Reg::Eax.index()] as u64;
                    self.regs[Reg::Eax.index()] = (dividend / divisor as u64) as u32;
                    self.regs[Reg::Edx.index()] = (dividend % divisor as u64) as u32;
                }
            }
            "push" => {
                let v = self.value_of(&ins.operands[0]);
                // push imm8/imm16 still reserves a dword slot
                self.push32(v, ins);
            }
            "pop" => {
                let v = self.pop32();
                self.write_operand(&ins.operands[0], v, ins);
            }
            "pushfd" | "pushf" => {
                let f = self.eflags_value();
                self.push32(f, ins);
            }
            "popfd" | "popf" => {
                let f = self.pop32();
                self.set_eflags(f);
            }
            "pushad" => {
                let order = [
                    Reg::Eax,
                    Reg::Ecx,
                    Reg::Edx,
                    Reg::Ebx,
                    Reg::Esp,
                    Reg::Ebp,
                    Reg::Esi,
                    Reg::Edi,
                ];
                let esp0 = self.regs[Reg::Esp.index()];
                for r in order {
                    let v = if r == Reg::Esp { esp0 } else { self.regs[r.index()] };
                    self.push32(v, ins);
                }
            }
            "popad" => {
                let order = [
                    Reg::Edi,
                    Reg::Esi,
                    Reg::Ebp,
                    Reg::Esp,
                    Reg::Ebx,
                    Reg::Edx,
                    Reg::Ecx,
                    Reg::Eax,
                ];
                for r in order {
                    let v = self.pop32();
                    if r != Reg::Esp {
                        self.regs[r.index()] = v;
                    }
                }
            }
            "leave" => {
                self.regs[Reg::Esp.index()] = self.regs[Reg::Ebp.index()];
                let v = self.pop32();
                self.regs[Reg::Ebp.index()] = v;
            }
            "xchg" => {
                let a = self.value_of(&ins.operands[0]);
                let b = self.value_of(&ins.operands[1]);
                self.write_operand(&ins.operands[0], b, ins);
                self.write_operand(&ins.operands[1], a, ins);
            }
            "bswap" => {
                let a = self.value_of(&ins.operands[0]);
                self.write_operand(&ins.operands[0], a.swap_bytes(), ins);
            }
            "cld" => self.df = false,
            "std" => self.df = true,
            "clc" => self.cf = false,
            "stc" => self.cf = true,
            "cmc" => self.cf = !self.cf,
            "nop" | "int" | "icebp" | "cli" | "sti" => {}
            "movsb" | "movsw" | "movsd" | "stosb" | "stosw" | "stosd" | "lodsb" | "lodsd" => {
                self.string_op(ins);
            }
            "call" => {
                // skipped call: return value reads as zero
                self.regs[Reg::Eax.index()] = 0;
            }
            "ret" | "iretd" | "hlt" => return false,
            "jmp" => match ins.flow {
                Flow::Jump(target) => self.eip = target,
                _ => return false, // indirect jump leaves the function
            },
            "loop" | "loope" | "loopne" => {
                let ecx = self.regs[Reg::Ecx.index()].wrapping_sub(1);
                self.regs[Reg::Ecx.index()] = ecx;
                let extra = match ins.mnemonic {
                    "loope" => self.zf,
                    "loopne" => !self.zf,
                    _ => true,
                };
                if ecx != 0 && extra {
                    if let Flow::CondJump(target) = ins.flow {
                        self.eip = target;
                    }
                }
            }
            "jecxz" => {
                if self.regs[Reg::Ecx.index()] == 0 {
                    if let Flow::CondJump(target) = ins.flow {
                        self.eip = target;
                    }
                }
            }
            m if m.starts_with('j') => {
                if let Flow::CondJump(target) = ins.flow {
                    if self.condition(&m[1..]) {
                        self.eip = target;
                    }
                }
            }
            m if m.starts_with("set") => {
                let v = self.condition(&m[3..]) as u32;
                self.write_operand(&ins.operands[0], v, ins);
            }
            m if m.starts_with("cmov") => {
                if self.condition(&m[4..]) {
                    let v = self.value_of(&ins.operands[1]);
                    self.write_operand(&ins.operands[0], v, ins);
                }
            }
            "cpuid" => {
                for r in [Reg::Eax, Reg::Ebx, Reg::Ecx, Reg::Edx] {
                    self.regs[r.index()] = 0;
                }
            }
            "rdtsc" => {
                self.regs[Reg::Eax.index()] = 0;
                self.regs[Reg::Edx.index()] = 0;
            }
            _ => {
                // unsupported: destination becomes Unknown(0)
                if let Some(op @ Operand::Register(_)) = ins.operands.first() {
                    self.write_operand(op, 0, ins);
                }
            }
        }
        true
    }

    /// movs/stos/lods with optional rep. Iterations are charged to the step
    /// budget so rep with a huge ecx cannot stall the run.
    fn string_op(&mut self, ins: &Instruction) {
        let width = match ins.mnemonic.as_bytes()[4] {
            b'b' => Width::Byte,
            b'w' => Width::Word,
            _ => Width::Dword,
        };
        let delta = if self.df {
            (width.bytes() as i64).wrapping_neg()
        } else {
            width.bytes() as i64
        };
        let mut count = if ins.rep.is_some() {
            self.regs[Reg::Ecx.index()] as u64
        } else {
            1
        };
        // the rep itself already cost one step
        while count > 0 {
            match &ins.mnemonic[..4] {
                "movs" => {
                    let v = self.read_mem(self.regs[Reg::Esi.index()], width);
                    let dst = self.regs[Reg::Edi.index()];
                    self.write_mem(dst, v, width, ins);
                    self.regs[Reg::Esi.index()] =
                        (self.regs[Reg::Esi.index()] as i64).wrapping_add(delta) as u32;
                    self.regs[Reg::Edi.index()] =
                        (self.regs[Reg::Edi.index()] as i64).wrapping_add(delta) as u32;
                }
                "stos" => {
                    let dst = self.regs[Reg::Edi.index()];
                    let v = self.regs[Reg::Eax.index()];
                    self.write_mem(dst, v, width, ins);
                    self.regs[Reg::Edi.index()] =
                        (self.regs[Reg::Edi.index()] as i64).wrapping_add(delta) as u32;
                }
                "lods" => {
                    let v = self.read_mem(self.regs[Reg::Esi.index()], width);
                    let ax = RegOperand {
                        reg: Reg::Eax,
                        width,
                        high: false,
                    };
                    self.write_reg(ax, v);
                    self.regs[Reg::Esi.index()] =
                        (self.regs[Reg::Esi.index()] as i64).wrapping_add(delta) as u32;
                }
                _ => break,
            }
            count -= 1;
            if ins.rep.is_some() {
                // F2 vs F3 only matters for scas/cmps, which are not modeled
                self.regs[Reg::Ecx.index()] = self.regs[Reg::Ecx.index()].wrapping_sub(1);
                self.steps += 1;
                if self.steps >= self.max_steps {
                    break;
                }
            }
        }
    }

    /// Group written addresses into contiguous runs and pull printable
    /// ASCII and UTF-16LE substrings out of each.
    fn scan_written_strings(&self, min_len: usize) -> Vec<RecoveredString> {
        let mut addrs: Vec<u32> = self.writes.keys().copied().collect();
        addrs.sort_unstable();

        let mut out = Vec::new();
        let mut run_start = 0usize;
        for i in 0..addrs.len() {
            let is_last = i + 1 == addrs.len();
            let broken = !is_last && addrs[i + 1] != addrs[i] + 1;
            if is_last || broken {
                let run = &addrs[run_start..=i];
                self.scan_run(run, min_len, &mut out);
                run_start = i + 1;
            }
        }

        out.sort_by(|a, b| {
            (a.attributed_block, &a.value, a.encoding == StringEncoding::Utf16le).cmp(&(
                b.attributed_block,
                &b.value,
                b.encoding == StringEncoding::Utf16le,
            ))
        });
        out.dedup_by(|a, b| a.value == b.value && a.attributed_block == b.attributed_block);
        out
    }

    fn scan_run(&self, run: &[u32], min_len: usize, out: &mut Vec<RecoveredString>) {
        let bytes: Vec<u8> = run.iter().map(|&a| self.read8(a)).collect();

        // ASCII substrings
        let mut start = None;
        for i in 0..=bytes.len() {
            let printable = i < bytes.len() && (0x20..0x7F).contains(&bytes[i]);
            match (printable, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    if i - s >= min_len {
                        self.emit(run, s, i, Ascii, out);
                    }
                    start = None;
                }
                _ => {}
            }
        }

        // UTF-16LE substrings: alternating printable/NUL pairs
        let mut pair_start = None;
        let mut chars = 0usize;
        let mut i = 0;
        while i + 1 < bytes.len() {
            let printable_pair =
                (0x20..0x7F).contains(&bytes[i]) && bytes[i + 1] == 0;
            if printable_pair {
                if pair_start.is_none() {
                    pair_start = Some(i);
                    chars = 0;
                }
                chars += 1;
                i += 2;
            } else {
                if let Some(s) = pair_start.take() {
                    if chars >= min_len {
                        self.emit_utf16(run, s, chars, out);
                    }
                }
                i += 1;
            }
        }
        if let Some(s) = pair_start {
            if chars >= min_len {
                self.emit_utf16(run, s, chars, out);
            }
        }
    }

    fn emit(
        &self,
        run: &[u32],
        from: usize,
        to: usize,
        encoding: StringEncoding,
        out: &mut Vec<RecoveredString>,
    ) {
        let value: String = run[from..to].iter().map(|&a| self.read8(a) as char).collect();
        let record = self.final_write_in(&run[from..to]);
        out.push(RecoveredString {
            value,
            encoding,
            origin: StringOrigin::Emulated,
            attributed_block: BlockId {
                function_entry: self.function_entry,
                start: record.block,
            },
            source_address: record.ins_addr,
        });
    }

    fn emit_utf16(&self, run: &[u32], from: usize, chars: usize, out: &mut Vec<RecoveredString>) {
        let value: String = (0..chars)
            .map(|k| self.read8(run[from + 2 * k]) as char)
            .collect();
        let record = self.final_write_in(&run[from..from + 2 * chars]);
        out.push(RecoveredString {
            value,
            encoding: StringEncoding::Utf16le,
            origin: StringOrigin::Emulated,
            attributed_block: BlockId {
                function_entry: self.function_entry,
                start: record.block,
            },
            source_address: record.ins_addr,
        });
    }

    fn final_write_in(&self, addrs: &[u32]) -> WriteRecord {
        addrs
            .iter()
            .filter_map(|a| self.writes.get(a))
            .max_by_key(|w| w.step)
            .copied()
            .unwrap_or(WriteRecord {
                step: 0,
                block: self.function_entry,
                ins_addr: self.function_entry,
            })
    }
}

fn mask(v: u32, width: Width) -> u32 {
    match width {
        Width::Byte => v & 0xFF,
        Width::Word => v & 0xFFFF,
        Width::Dword => v,
    }
}

fn sign_bit(width: Width) -> u32 {
    match width {
        Width::Byte => 0x80,
        Width::Word => 0x8000,
        Width::Dword => 0x8000_0000,
    }
}

fn sign_extend(v: u32, width: Width) -> i32 {
    match width {
        Width::Byte => v as u8 as i8 as i32,
        Width::Word => v as u16 as i16 as i32,
        Width::Dword => v as i32,
    }
}
