//! Binary loading: PE32 parsing, synthetic fixtures, and packing assessment.

mod fixture;
mod pe;

pub use fixture::load_fixture;
pub use pe::parse_pe;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::Va;

#[derive(Debug, Error)]
pub enum LoaderError {
    #[error("not a PE file: {0}")]
    NotPe(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("unsupported architecture: {0}")]
    UnsupportedArch(String),
    #[error("malformed fixture manifest: {0}")]
    MalformedManifest(String),
}

/// Where the image came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatKind {
    Pe32,
    RawFixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectionFlags {
    pub executable: bool,
    pub readable: bool,
    pub writable: bool,
    pub initialized_data: bool,
}

/// One mapped section of the image.
#[derive(Debug, Clone)]
pub struct Section {
    pub name: String,
    pub virtual_address: Va,
    pub size: u32,
    pub flags: SectionFlags,
    /// Offset of this section's bytes inside the backing file buffer.
    file_offset: usize,
    /// Number of bytes actually present in the file; reads past this (but
    /// inside `size`) yield zeroes, matching how the OS loader pads sections.
    file_size: usize,
}

impl Section {
    pub fn contains(&self, va: Va) -> bool {
        va >= self.virtual_address && (va - self.virtual_address) < self.size
    }

    pub fn end(&self) -> u64 {
        self.virtual_address as u64 + self.size as u64
    }
}

/// One resolved import: `(library, symbol, IAT slot virtual address)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportEntry {
    pub library: String,
    pub symbol: String,
    pub iat_slot: Va,
}

#[derive(Debug, Clone, Default)]
pub struct ImportTable {
    pub entries: Vec<ImportEntry>,
}

impl ImportTable {
    /// Import symbol whose IAT slot is exactly `va`, if any.
    pub fn symbol_at_slot(&self, va: Va) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.iat_slot == va)
            .map(|e| e.symbol.as_str())
    }

    /// Number of distinct libraries, compared case-insensitively.
    pub fn distinct_library_count(&self) -> usize {
        let mut names: Vec<String> = self
            .entries
            .iter()
            .map(|e| e.library.to_ascii_lowercase())
            .collect();
        names.sort();
        names.dedup();
        names.len()
    }
}

/// A parsed, immutable binary image with a virtual-address byte accessor.
#[derive(Debug, Clone)]
pub struct BinaryImage {
    pub format_kind: FormatKind,
    pub sections: Vec<Section>,
    pub imports: ImportTable,
    pub entry_point: Va,
    pub image_base: Va,
    bytes: Vec<u8>,
}

impl BinaryImage {
    pub(crate) fn new(
        format_kind: FormatKind,
        sections: Vec<Section>,
        imports: ImportTable,
        entry_point: Va,
        image_base: Va,
        bytes: Vec<u8>,
    ) -> Self {
        BinaryImage {
            format_kind,
            sections,
            imports,
            entry_point,
            image_base,
            bytes,
        }
    }

    pub fn section_containing(&self, va: Va) -> Option<&Section> {
        self.sections.iter().find(|s| s.contains(va))
    }

    pub fn is_executable(&self, va: Va) -> bool {
        self.section_containing(va).is_some_and(|s| s.flags.executable)
    }

    pub fn is_mapped(&self, va: Va) -> bool {
        self.section_containing(va).is_some()
    }

    /// Byte at `va`, or `None` when the address is outside every section.
    pub fn read_byte(&self, va: Va) -> Option<u8> {
        let section = self.section_containing(va)?;
        let delta = (va - section.virtual_address) as usize;
        if delta < section.file_size {
            self.bytes.get(section.file_offset + delta).copied()
        } else {
            Some(0)
        }
    }

    /// Contiguous slice of up to `len` bytes starting at `va`, stopping at the
    /// section boundary.
    pub fn read_bytes(&self, va: Va, len: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(len);
        for i in 0..len as u64 {
            let Some(addr) = (va as u64).checked_add(i).and_then(|a| u32::try_from(a).ok()) else {
                break;
            };
            match self.read_byte(addr) {
                Some(b) => out.push(b),
                None => break,
            }
        }
        out
    }

    pub fn read_u32(&self, va: Va) -> Option<u32> {
        let mut v = 0u32;
        for i in 0..4 {
            v |= (self.read_byte(va.checked_add(i)?)? as u32) << (8 * i);
        }
        Some(v)
    }

    /// Raw file buffer this image was parsed from.
    pub fn file_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackingVerdict {
    NotPacked,
    HeuristicPacked,
    KnownPacker,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackingAssessment {
    pub verdict: PackingVerdict,
    pub packer_name: Option<String>,
    pub library_count: usize,
    pub function_count: usize,
}

impl PackingAssessment {
    pub fn is_packed(&self) -> bool {
        self.verdict != PackingVerdict::NotPacked
    }
}

/// Thresholds for the import-poverty packing heuristic plus known packer
/// section names.
#[derive(Debug, Clone)]
pub struct PackerHeuristicConfig {
    pub min_libraries: usize,
    pub min_functions: usize,
    /// `(section name, packer display name)` pairs.
    pub known_packer_section_names: Vec<(String, String)>,
}

impl Default for PackerHeuristicConfig {
    fn default() -> Self {
        PackerHeuristicConfig {
            min_libraries: 5,
            min_functions: 15,
            known_packer_section_names: [
                ("UPX0", "UPX"),
                ("UPX1", "UPX"),
                (".aspack", "ASPack"),
                (".themida", "Themida"),
            ]
            .iter()
            .map(|(s, p)| (s.to_string(), p.to_string()))
            .collect(),
        }
    }
}

/// Assess whether `image` looks packed.
///
/// A known-packer section name wins outright; otherwise an image importing
/// fewer than `min_libraries` distinct libraries or fewer than `min_functions`
/// total entries is flagged as heuristically packed. Both thresholds are
/// strict ("fewer than"), so meeting them exactly counts as not packed.
pub fn detect_packing(image: &BinaryImage, config: &PackerHeuristicConfig) -> PackingAssessment {
    let library_count = image.imports.distinct_library_count();
    let function_count = image.imports.entries.len();

    for section in &image.sections {
        if let Some((_, packer)) = config
            .known_packer_section_names
            .iter()
            .find(|(name, _)| name == &section.name)
        {
            return PackingAssessment {
                verdict: PackingVerdict::KnownPacker,
                packer_name: Some(packer.clone()),
                library_count,
                function_count,
            };
        }
    }

    let verdict = if library_count < config.min_libraries || function_count < config.min_functions
    {
        PackingVerdict::HeuristicPacked
    } else {
        PackingVerdict::NotPacked
    };
    PackingAssessment {
        verdict,
        packer_name: None,
        library_count,
        function_count,
    }
}

pub(crate) fn validate_sections(sections: &[Section]) -> Result<(), LoaderError> {
    let mut ranges: BTreeMap<u64, u64> = BTreeMap::new();
    for s in sections {
        if s.size == 0 {
            return Err(LoaderError::CorruptHeader(format!(
                "section {:?} has zero size",
                s.name
            )));
        }
        if s.name.len() > 8 {
            return Err(LoaderError::CorruptHeader(format!(
                "section name {:?} longer than 8 bytes",
                s.name
            )));
        }
        ranges.insert(s.virtual_address as u64, s.end());
    }
    let mut prev_end = 0u64;
    for (start, end) in ranges {
        if start < prev_end {
            return Err(LoaderError::CorruptHeader(
                "section virtual ranges overlap".into(),
            ));
        }
        prev_end = end;
    }
    Ok(())
}

pub(crate) fn validate_imports(imports: &ImportTable) -> Result<(), LoaderError> {
    let mut slots: Vec<Va> = Vec::with_capacity(imports.entries.len());
    for e in &imports.entries {
        if e.library.is_empty() {
            return Err(LoaderError::CorruptHeader("import with empty library".into()));
        }
        if e.symbol.is_empty() {
            return Err(LoaderError::CorruptHeader("import with empty symbol".into()));
        }
        slots.push(e.iat_slot);
    }
    slots.sort_unstable();
    let before = slots.len();
    slots.dedup();
    if slots.len() != before {
        return Err(LoaderError::CorruptHeader("duplicate IAT slot".into()));
    }
    Ok(())
}
