//! Per-block evidence extraction: assembly features, string features, and
//! API call features. Each feature is one natural-language line that later
//! becomes a prompt bullet.

pub mod api;
pub mod asm;
pub mod emulate;
pub mod strings;

use crate::disasm::BlockId;
use crate::Va;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FeatureKind {
    UncommonIns,
    SegmentAccess,
    StringRef,
    ApiCall,
}

/// One rendered evidence line attributed to a block and the instruction that
/// produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feature {
    pub kind: FeatureKind,
    pub text: String,
    pub block_id: BlockId,
    pub source_address: Va,
}

impl Feature {
    pub fn new(kind: FeatureKind, text: String, block_id: BlockId, source_address: Va) -> Self {
        debug_assert!(!text.is_empty());
        Feature {
            kind,
            text,
            block_id,
            source_address,
        }
    }
}

/// Render the string feature line. Embedded quotes are escaped; everything
/// printable passes through as UTF-8.
pub fn render_string_feature(value: &str) -> String {
    format!("String Reference: \"{}\"", value.replace('"', "\\\""))
}
