//! Text fixture manifests: a desk-scale load path that bypasses PE tooling.
//!
//! Grammar (one `key = value` per line, `#` starts a comment):
//!
//! ```text
//! base     = 0x00400000            # required; section load address
//! entry    = 0x00400000            # optional; defaults to base
//! code_hex = B8 01 00 00 00 C3     # required; repeated lines concatenate
//! import   = user32.dll, MessageBoxA, 0x00403000   # zero or more
//! ```
//!
//! The result is a `RawFixture` image with a single executable+readable
//! section holding the code bytes and the declared synthetic import table.

use crate::Va;

use super::{
    validate_imports, BinaryImage, FormatKind, ImportEntry, ImportTable, LoaderError, Section,
    SectionFlags,
};

/// Parse a fixture manifest into a loaded image.
pub fn load_fixture(manifest: &str) -> Result<BinaryImage, LoaderError> {
    let mut base: Option<Va> = None;
    let mut entry: Option<Va> = None;
    let mut code: Vec<u8> = Vec::new();
    let mut imports = ImportTable::default();

    for (lineno, raw_line) in manifest.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            malformed(lineno, "expected `key = value`")
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "base" => base = Some(parse_va(lineno, value)?),
            "entry" => entry = Some(parse_va(lineno, value)?),
            "code_hex" => {
                let compact: String = value.chars().filter(|c| !c.is_whitespace()).collect();
                let bytes = hex::decode(&compact)
                    .map_err(|e| malformed(lineno, &format!("bad code_hex: {e}")))?;
                code.extend_from_slice(&bytes);
            }
            "import" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(malformed(lineno, "import takes `library, symbol, slot`"));
                }
                if parts[0].is_empty() || parts[1].is_empty() {
                    return Err(malformed(lineno, "import library/symbol must be nonempty"));
                }
                imports.entries.push(ImportEntry {
                    library: parts[0].to_string(),
                    symbol: parts[1].to_string(),
                    iat_slot: parse_va(lineno, parts[2])?,
                });
            }
            other => return Err(malformed(lineno, &format!("unknown key {other:?}"))),
        }
    }

    let base = base.ok_or_else(|| LoaderError::MalformedManifest("missing `base`".into()))?;
    if code.is_empty() {
        return Err(LoaderError::MalformedManifest("missing `code_hex`".into()));
    }
    validate_imports(&imports)
        .map_err(|e| LoaderError::MalformedManifest(e.to_string()))?;
    let size = u32::try_from(code.len())
        .map_err(|_| LoaderError::MalformedManifest("code too large".into()))?;
    if base.checked_add(size - 1).is_none() {
        return Err(LoaderError::MalformedManifest(
            "code wraps the 32-bit address space".into(),
        ));
    }

    let section = Section {
        name: ".text".into(),
        virtual_address: base,
        size,
        flags: SectionFlags {
            executable: true,
            readable: true,
            writable: false,
            initialized_data: true,
        },
        file_offset: 0,
        file_size: code.len(),
    };
    Ok(BinaryImage::new(
        FormatKind::RawFixture,
        vec![section],
        imports,
        entry.unwrap_or(base),
        base,
        code,
    ))
}

fn parse_va(lineno: usize, text: &str) -> Result<Va, LoaderError> {
    let parsed = if let Some(hexpart) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X"))
    {
        Va::from_str_radix(hexpart, 16)
    } else {
        text.parse()
    };
    parsed.map_err(|_| malformed(lineno, &format!("bad address {text:?}")))
}

fn malformed(lineno: usize, message: &str) -> LoaderError {
    LoaderError::MalformedManifest(format!("line {}: {message}", lineno + 1))
}
