//! Shared test support: a minimal PE32 builder (headers written field by
//! field from the published layout, so parser output can be checked against
//! the exact values written), corpus path helpers, and a random straight-
//! line-plus-branches program generator.

#![allow(dead_code)]

use std::path::PathBuf;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn corpus_path(name: &str) -> PathBuf {
    data_dir().join("corpus").join(format!("{name}.tfx"))
}

pub fn golden(name: &str) -> String {
    std::fs::read_to_string(data_dir().join("golden").join(name))
        .unwrap_or_else(|e| panic!("golden file {name}: {e}"))
}

// ---------------------------------------------------------------------------
// PE32 builder
// ---------------------------------------------------------------------------

const FILE_ALIGN: u32 = 0x200;
const SECTION_ALIGN: u32 = 0x1000;

pub const SCN_CODE_FLAGS: u32 = 0x6000_0020; // CODE | EXECUTE | READ
pub const SCN_DATA_FLAGS: u32 = 0xC000_0040; // INITIALIZED_DATA | READ | WRITE
pub const SCN_RDATA_FLAGS: u32 = 0x4000_0040; // INITIALIZED_DATA | READ

pub struct SectionSpec {
    pub name: String,
    pub rva: u32,
    pub data: Vec<u8>,
    pub characteristics: u32,
}

pub struct ImportSpec {
    pub library: String,
    pub symbols: Vec<String>,
}

/// Builds a minimal, well-formed PE32 file.
pub struct PeBuilder {
    pub image_base: u32,
    pub entry_rva: u32,
    pub machine: u16,
    pub optional_magic: u16,
    pub sections: Vec<SectionSpec>,
    /// When set, an import section is synthesized at this RVA.
    pub imports: Vec<ImportSpec>,
    pub import_section_rva: u32,
}

impl PeBuilder {
    pub fn new() -> PeBuilder {
        PeBuilder {
            image_base: 0x0040_0000,
            entry_rva: 0x1000,
            machine: 0x014C,
            optional_magic: 0x010B,
            sections: Vec::new(),
            imports: Vec::new(),
            import_section_rva: 0x3000,
        }
    }

    pub fn code_section(mut self, rva: u32, code: &[u8]) -> Self {
        self.sections.push(SectionSpec {
            name: ".text".into(),
            rva,
            data: code.to_vec(),
            characteristics: SCN_CODE_FLAGS,
        });
        self
    }

    pub fn section(mut self, name: &str, rva: u32, data: &[u8], characteristics: u32) -> Self {
        self.sections.push(SectionSpec {
            name: name.into(),
            rva,
            data: data.to_vec(),
            characteristics,
        });
        self
    }

    pub fn import(mut self, library: &str, symbols: &[&str]) -> Self {
        self.imports.push(ImportSpec {
            library: library.into(),
            symbols: symbols.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    /// Expected IAT slot VA for `(library index, symbol index)` given this
    /// builder's deterministic import layout. Valid after `build()`.
    pub fn iat_slot(&self, lib_index: usize, sym_index: usize) -> u32 {
        let layout = ImportLayout::compute(&self.imports, self.import_section_rva);
        self.image_base + layout.iat_rvas[lib_index] + 4 * sym_index as u32
    }

    pub fn build(&self) -> Vec<u8> {
        let mut sections: Vec<SectionSpec> = self
            .sections
            .iter()
            .map(|s| SectionSpec {
                name: s.name.clone(),
                rva: s.rva,
                data: s.data.clone(),
                characteristics: s.characteristics,
            })
            .collect();

        if !self.imports.is_empty() {
            let layout = ImportLayout::compute(&self.imports, self.import_section_rva);
            sections.push(SectionSpec {
                name: ".idata".into(),
                rva: self.import_section_rva,
                data: layout.bytes,
                characteristics: SCN_RDATA_FLAGS,
            });
        }

        let section_count = sections.len() as u16;
        let opt_size = 0xE0u16;
        let headers_end = 0x40 + 4 + 20 + opt_size as u32 + 40 * section_count as u32;
        let headers_size = align(headers_end, FILE_ALIGN);

        // assign file offsets
        let mut offset = headers_size;
        let mut placed: Vec<(u32, &SectionSpec)> = Vec::new();
        for s in &sections {
            placed.push((offset, s));
            offset += align(s.data.len() as u32, FILE_ALIGN);
        }
        let image_size = sections
            .iter()
            .map(|s| align(s.rva + s.data.len() as u32, SECTION_ALIGN))
            .max()
            .unwrap_or(SECTION_ALIGN);

        let mut out = vec![0u8; offset as usize];

        // DOS header
        out[0] = b'M';
        out[1] = b'Z';
        put32(&mut out, 0x3C, 0x40);

        // PE signature
        out[0x40] = b'P';
        out[0x41] = b'E';

        // COFF header
        let coff = 0x44;
        put16(&mut out, coff, self.machine);
        put16(&mut out, coff + 2, section_count);
        put16(&mut out, coff + 16, opt_size);
        put16(&mut out, coff + 18, 0x0102); // EXECUTABLE_IMAGE | 32BIT_MACHINE

        // Optional header
        let opt = coff + 20;
        put16(&mut out, opt, self.optional_magic);
        put32(&mut out, opt + 16, self.entry_rva);
        put32(&mut out, opt + 28, self.image_base);
        put32(&mut out, opt + 32, SECTION_ALIGN);
        put32(&mut out, opt + 36, FILE_ALIGN);
        put32(&mut out, opt + 56, image_size);
        put32(&mut out, opt + 60, headers_size);
        put16(&mut out, opt + 68, 3); // console subsystem
        put32(&mut out, opt + 92, 16); // NumberOfRvaAndSizes
        if !self.imports.is_empty() {
            let layout = ImportLayout::compute(&self.imports, self.import_section_rva);
            put32(&mut out, opt + 96 + 8, self.import_section_rva);
            put32(&mut out, opt + 96 + 12, layout.directory_size);
        }

        // Section table
        let table = opt + opt_size as usize;
        for (i, (file_offset, s)) in placed.iter().enumerate() {
            let e = table + 40 * i;
            let name_bytes = s.name.as_bytes();
            out[e..e + name_bytes.len().min(8)]
                .copy_from_slice(&name_bytes[..name_bytes.len().min(8)]);
            put32(&mut out, e + 8, s.data.len() as u32); // VirtualSize
            put32(&mut out, e + 12, s.rva);
            put32(&mut out, e + 16, align(s.data.len() as u32, FILE_ALIGN)); // SizeOfRawData
            put32(&mut out, e + 20, *file_offset);
            put32(&mut out, e + 36, s.characteristics);
        }

        // Section contents
        for (file_offset, s) in &placed {
            let start = *file_offset as usize;
            out[start..start + s.data.len()].copy_from_slice(&s.data);
        }
        out
    }
}

struct ImportLayout {
    bytes: Vec<u8>,
    directory_size: u32,
    iat_rvas: Vec<u32>,
}

impl ImportLayout {
    /// Deterministic layout: descriptor array, per-library OFT thunks,
    /// per-library IAT thunks, hint/name entries, library names.
    fn compute(imports: &[ImportSpec], base_rva: u32) -> ImportLayout {
        let nlibs = imports.len();
        let descriptors_size = 20 * (nlibs + 1) as u32;

        let mut oft_rvas = Vec::with_capacity(nlibs);
        let mut iat_rvas = Vec::with_capacity(nlibs);
        let mut cursor = base_rva + descriptors_size;
        for spec in imports {
            oft_rvas.push(cursor);
            cursor += 4 * (spec.symbols.len() as u32 + 1);
        }
        for spec in imports {
            iat_rvas.push(cursor);
            cursor += 4 * (spec.symbols.len() as u32 + 1);
        }
        // hint/name entries
        let mut hint_name_rvas: Vec<Vec<u32>> = Vec::with_capacity(nlibs);
        for spec in imports {
            let mut rvas = Vec::with_capacity(spec.symbols.len());
            for symbol in &spec.symbols {
                rvas.push(cursor);
                let mut len = 2 + symbol.len() as u32 + 1;
                if len % 2 == 1 {
                    len += 1;
                }
                cursor += len;
            }
            hint_name_rvas.push(rvas);
        }
        let mut name_rvas = Vec::with_capacity(nlibs);
        for spec in imports {
            name_rvas.push(cursor);
            cursor += spec.library.len() as u32 + 1;
        }

        let total = (cursor - base_rva) as usize;
        let mut bytes = vec![0u8; total];
        let at = |rva: u32| (rva - base_rva) as usize;

        for (i, spec) in imports.iter().enumerate() {
            let d = 20 * i;
            put32(&mut bytes, d, oft_rvas[i]);
            put32(&mut bytes, d + 12, name_rvas[i]);
            put32(&mut bytes, d + 16, iat_rvas[i]);

            for (j, _symbol) in spec.symbols.iter().enumerate() {
                let thunk = hint_name_rvas[i][j];
                put32(&mut bytes, at(oft_rvas[i]) + 4 * j, thunk);
                put32(&mut bytes, at(iat_rvas[i]) + 4 * j, thunk);
            }
            for (j, symbol) in spec.symbols.iter().enumerate() {
                let h = at(hint_name_rvas[i][j]);
                bytes[h + 2..h + 2 + symbol.len()].copy_from_slice(symbol.as_bytes());
            }
            let n = at(name_rvas[i]);
            bytes[n..n + spec.library.len()].copy_from_slice(spec.library.as_bytes());
        }

        ImportLayout {
            bytes,
            directory_size: descriptors_size,
            iat_rvas,
        }
    }
}

fn align(v: u32, to: u32) -> u32 {
    v.div_ceil(to) * to
}

fn put16(buf: &mut [u8], at: usize, v: u16) {
    buf[at..at + 2].copy_from_slice(&v.to_le_bytes());
}

fn put32(buf: &mut [u8], at: usize, v: u32) {
    buf[at..at + 4].copy_from_slice(&v.to_le_bytes());
}

// ---------------------------------------------------------------------------
// Random program generator (straight-line + branches)
// ---------------------------------------------------------------------------

use rand::rngs::StdRng;
use rand::Rng;

#[derive(Clone, Copy)]
enum GenIns {
    Simple(&'static [u8]),
    MovEaxImm(u32),
    Jcc(usize),
    Jmp(usize),
    Ret,
}

impl GenIns {
    fn len(&self) -> u32 {
        match self {
            GenIns::Simple(bytes) => bytes.len() as u32,
            GenIns::MovEaxImm(_) => 5,
            GenIns::Jcc(_) => 6, // 0F 8x rel32
            GenIns::Jmp(_) => 5, // E9 rel32
            GenIns::Ret => 1,
        }
    }
}

/// Generate a decodable program of at most `max_instructions` instructions:
/// moves, arithmetic, conditional and unconditional branches to random
/// instruction boundaries, terminated by ret.
pub fn random_program(rng: &mut StdRng, base: u32, max_instructions: usize) -> Vec<u8> {
    const SIMPLE: &[&[u8]] = &[
        &[0x90],             // nop
        &[0x31, 0xC0],       // xor eax, eax
        &[0x89, 0xC6],       // mov esi, eax
        &[0x83, 0xC0, 0x07], // add eax, 7
        &[0x83, 0xF8, 0x03], // cmp eax, 3
        &[0x01, 0xD8],       // add eax, ebx
    ];

    let n = rng.gen_range(2..=max_instructions.max(2));
    let mut instructions: Vec<GenIns> = (0..n - 1)
        .map(|_| match rng.gen_range(0..10u32) {
            0 | 1 => GenIns::Jcc(0),
            2 => GenIns::Jmp(0),
            3 => GenIns::Ret,
            4 => GenIns::MovEaxImm(rng.gen()),
            _ => GenIns::Simple(SIMPLE[rng.gen_range(0..SIMPLE.len())]),
        })
        .collect();
    instructions.push(GenIns::Ret);

    // patch branch targets to real instruction indices
    let count = instructions.len();
    for ins in instructions.iter_mut() {
        match ins {
            GenIns::Jcc(t) | GenIns::Jmp(t) => *t = rng.gen_range(0..count),
            _ => {}
        }
    }

    // layout
    let mut addrs = Vec::with_capacity(count);
    let mut va = base;
    for ins in &instructions {
        addrs.push(va);
        va += ins.len();
    }

    let mut code = Vec::new();
    for (i, ins) in instructions.iter().enumerate() {
        match ins {
            GenIns::Simple(bytes) => code.extend_from_slice(bytes),
            GenIns::MovEaxImm(v) => {
                code.push(0xB8);
                code.extend_from_slice(&v.to_le_bytes());
            }
            GenIns::Jcc(target) => {
                let cc = 0x80 + (i % 16) as u8;
                let next = addrs[i] + 6;
                let rel = addrs[*target].wrapping_sub(next) as i32;
                code.push(0x0F);
                code.push(cc);
                code.extend_from_slice(&rel.to_le_bytes());
            }
            GenIns::Jmp(target) => {
                let next = addrs[i] + 5;
                let rel = addrs[*target].wrapping_sub(next) as i32;
                code.push(0xE9);
                code.extend_from_slice(&rel.to_le_bytes());
            }
            GenIns::Ret => code.push(0xC3),
        }
    }
    code
}
