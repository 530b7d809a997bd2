//! PE32 header parsing: sections, entry point, and the import address table.

use crate::Va;

use super::{
    validate_imports, validate_sections, BinaryImage, FormatKind, ImportEntry, ImportTable,
    LoaderError, Section, SectionFlags,
};

const DOS_MAGIC: u16 = 0x5A4D; // "MZ"
const PE_SIGNATURE: u32 = 0x0000_4550; // "PE\0\0"
const MACHINE_I386: u16 = 0x014C;
const OPTIONAL_MAGIC_PE32: u16 = 0x010B;
const OPTIONAL_MAGIC_PE32_PLUS: u16 = 0x020B;

const SCN_CNT_INITIALIZED_DATA: u32 = 0x0000_0040;
const SCN_MEM_EXECUTE: u32 = 0x2000_0000;
const SCN_MEM_READ: u32 = 0x4000_0000;
const SCN_MEM_WRITE: u32 = 0x8000_0000;

const IMPORT_DIRECTORY_INDEX: usize = 1;

/// Parse a 32-bit PE image.
///
/// Rejects non-PE input (`NotPe`), 64-bit or non-x86 machines
/// (`UnsupportedArch`), and structurally inconsistent headers
/// (`CorruptHeader`).
pub fn parse_pe(bytes: &[u8]) -> Result<BinaryImage, LoaderError> {
    let r = Reader(bytes);
    if bytes.len() < 0x40 || r.u16(0)? != DOS_MAGIC {
        return Err(LoaderError::NotPe("missing MZ magic".into()));
    }
    let e_lfanew = r.u32(0x3C)? as usize;
    if r.u32(e_lfanew)? != PE_SIGNATURE {
        return Err(LoaderError::NotPe("missing PE signature".into()));
    }

    // COFF file header
    let coff = e_lfanew + 4;
    let machine = r.u16(coff)?;
    let section_count = r.u16(coff + 2)? as usize;
    let optional_size = r.u16(coff + 16)? as usize;
    if machine != MACHINE_I386 {
        return Err(LoaderError::UnsupportedArch(format!(
            "machine 0x{machine:04x}, expected x86-32 (0x014c)"
        )));
    }

    // Optional header
    let opt = coff + 20;
    let magic = r.u16(opt)?;
    if magic == OPTIONAL_MAGIC_PE32_PLUS {
        return Err(LoaderError::UnsupportedArch("PE32+ (64-bit) image".into()));
    }
    if magic != OPTIONAL_MAGIC_PE32 {
        return Err(LoaderError::CorruptHeader(format!(
            "unknown optional header magic 0x{magic:04x}"
        )));
    }
    if optional_size < 96 {
        return Err(LoaderError::CorruptHeader(
            "optional header too small for PE32".into(),
        ));
    }
    let entry_rva = r.u32(opt + 16)?;
    let image_base = r.u32(opt + 28)?;
    let dir_count = r.u32(opt + 92)? as usize;

    let mut import_dir_rva = 0u32;
    if dir_count > IMPORT_DIRECTORY_INDEX {
        import_dir_rva = r.u32(opt + 96 + 8 * IMPORT_DIRECTORY_INDEX)?;
    }

    // Section table
    let mut sections = Vec::with_capacity(section_count);
    let table = opt + optional_size;
    for i in 0..section_count {
        let s = table + 40 * i;
        let name_bytes = r.slice(s, 8)?;
        let name: String = name_bytes
            .iter()
            .take_while(|&&b| b != 0)
            .map(|&b| b as char)
            .collect();
        let virtual_size = r.u32(s + 8)?;
        let rva = r.u32(s + 12)?;
        let raw_size = r.u32(s + 16)? as usize;
        let raw_offset = r.u32(s + 20)? as usize;
        let characteristics = r.u32(s + 36)?;

        if raw_size > 0 && raw_offset.checked_add(raw_size).is_none_or(|end| end > bytes.len()) {
            return Err(LoaderError::CorruptHeader(format!(
                "section {name:?} raw data [0x{raw_offset:x}; +0x{raw_size:x}) extends past end of file"
            )));
        }
        let size = if virtual_size != 0 {
            virtual_size
        } else {
            raw_size as u32
        };
        let virtual_address = image_base.checked_add(rva).ok_or_else(|| {
            LoaderError::CorruptHeader(format!("section {name:?} RVA overflows image base"))
        })?;
        if virtual_address.checked_add(size.saturating_sub(1)).is_none() {
            return Err(LoaderError::CorruptHeader(format!(
                "section {name:?} wraps the 32-bit address space"
            )));
        }
        sections.push(Section {
            name,
            virtual_address,
            size,
            flags: SectionFlags {
                executable: characteristics & SCN_MEM_EXECUTE != 0,
                readable: characteristics & SCN_MEM_READ != 0,
                writable: characteristics & SCN_MEM_WRITE != 0,
                initialized_data: characteristics & SCN_CNT_INITIALIZED_DATA != 0,
            },
            file_offset: raw_offset,
            file_size: raw_size.min(size as usize),
        });
    }
    validate_sections(&sections)?;

    let entry_point = image_base.checked_add(entry_rva).ok_or_else(|| {
        LoaderError::CorruptHeader("entry point overflows image base".into())
    })?;

    let mut image = BinaryImage::new(
        FormatKind::Pe32,
        sections,
        ImportTable::default(),
        entry_point,
        image_base,
        bytes.to_vec(),
    );

    if !image.is_executable(entry_point) {
        return Err(LoaderError::CorruptHeader(format!(
            "entry point 0x{entry_point:08x} is not inside an executable section"
        )));
    }

    if import_dir_rva != 0 {
        image.imports = parse_import_table(&image, image_base + import_dir_rva)?;
        validate_imports(&image.imports)?;
    }
    Ok(image)
}

/// Walk the `IMAGE_IMPORT_DESCRIPTOR` array at `va` and resolve every thunk.
fn parse_import_table(image: &BinaryImage, va: Va) -> Result<ImportTable, LoaderError> {
    let mut entries = Vec::new();
    let mut descriptor = va;
    loop {
        let original_first_thunk = read_u32(image, descriptor)?;
        let name_rva = read_u32(image, descriptor + 12)?;
        let first_thunk = read_u32(image, descriptor + 16)?;
        if name_rva == 0 && first_thunk == 0 && original_first_thunk == 0 {
            break;
        }
        if name_rva == 0 || first_thunk == 0 {
            return Err(LoaderError::CorruptHeader(
                "import descriptor with null name or IAT".into(),
            ));
        }
        let library = read_cstring(image, image.image_base + name_rva)?;
        if library.is_empty() {
            return Err(LoaderError::CorruptHeader("empty import library name".into()));
        }

        // Names come from the original first thunk when present (the loader
        // overwrites the first thunk at run time; in a file both hold RVAs).
        let name_thunks = if original_first_thunk != 0 {
            original_first_thunk
        } else {
            first_thunk
        };
        let mut index = 0u32;
        loop {
            let thunk = read_u32(image, image.image_base + name_thunks + 4 * index)?;
            if thunk == 0 {
                break;
            }
            let symbol = if thunk & 0x8000_0000 != 0 {
                format!("ordinal#{}", thunk & 0xFFFF)
            } else {
                // IMAGE_IMPORT_BY_NAME: u16 hint then NUL-terminated name
                read_cstring(image, image.image_base + thunk + 2)?
            };
            if symbol.is_empty() {
                return Err(LoaderError::CorruptHeader(format!(
                    "empty import symbol in {library}"
                )));
            }
            entries.push(ImportEntry {
                library: library.clone(),
                symbol,
                iat_slot: image.image_base + first_thunk + 4 * index,
            });
            index += 1;
            if index > 0x10000 {
                return Err(LoaderError::CorruptHeader(format!(
                    "unterminated thunk array for {library}"
                )));
            }
        }
        descriptor += 20;
        if entries.len() > 0x40000 {
            return Err(LoaderError::CorruptHeader("import table too large".into()));
        }
    }
    Ok(ImportTable { entries })
}

fn read_u32(image: &BinaryImage, va: Va) -> Result<u32, LoaderError> {
    image.read_u32(va).ok_or_else(|| {
        LoaderError::CorruptHeader(format!("import data at 0x{va:08x} is unmapped"))
    })
}

fn read_cstring(image: &BinaryImage, va: Va) -> Result<String, LoaderError> {
    let mut out = String::new();
    let mut addr = va;
    loop {
        let b = image.read_byte(addr).ok_or_else(|| {
            LoaderError::CorruptHeader(format!("string at 0x{va:08x} runs off the image"))
        })?;
        if b == 0 {
            return Ok(out);
        }
        if !(0x20..0x7F).contains(&b) {
            return Err(LoaderError::CorruptHeader(format!(
                "non-printable byte 0x{b:02x} in name at 0x{va:08x}"
            )));
        }
        out.push(b as char);
        addr = addr.checked_add(1).ok_or_else(|| {
            LoaderError::CorruptHeader("name wraps the address space".into())
        })?;
        if out.len() > 512 {
            return Err(LoaderError::CorruptHeader("unterminated name".into()));
        }
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn slice(&self, offset: usize, len: usize) -> Result<&[u8], LoaderError> {
        self.0
            .get(offset..offset.checked_add(len).ok_or_else(Self::oob)?)
            .ok_or_else(Self::oob)
    }

    fn u16(&self, offset: usize) -> Result<u16, LoaderError> {
        let s = self.slice(offset, 2)?;
        Ok(u16::from_le_bytes([s[0], s[1]]))
    }

    fn u32(&self, offset: usize) -> Result<u32, LoaderError> {
        let s = self.slice(offset, 4)?;
        Ok(u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
    }

    fn oob() -> LoaderError {
        LoaderError::CorruptHeader("offset out of range".into())
    }
}
