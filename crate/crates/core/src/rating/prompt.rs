//! Prompt assembly: a fixed instruction header followed by one bullet per
//! feature line, byte-deterministic.

use crate::disasm::BlockId;
use crate::features::Feature;

/// The fixed instruction header every per-block prompt starts with.
pub const PROMPT_HEADER: &str = "\
I want you to help me identify whether a basic block in a binary program is related to anti-dynamic analysis techniques, such as detecting a debugger, sandbox and/or VM.
I will provide some static analysis results of the basic block, including 1) Called APIs (API), 2) Static Strings referred, 3) Uncommon instructions (INS), and 4) Segment Register Reference (SegReg)
Rate from 0 to 10, how likely the code is related to anti-analysis.

I will use your answer to decide whether to put a breakpoint at the basic block, so try to avoid false negatives, and DO NOT consider anti-static analysis techniques.
Please only give the rating number, no explanation
";

/// A rendered per-block prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub block_id: BlockId,
    pub feature_lines: Vec<String>,
    pub rendered: String,
}

/// Render the prompt for one block's features, preserving their order.
/// Features arrive already ordered (assembly, strings, APIs, each by
/// address); this function only lays out header, blank line, and bullets.
pub fn build_prompt(block_id: BlockId, features: &[Feature]) -> Prompt {
    let feature_lines: Vec<String> = features.iter().map(|f| f.text.clone()).collect();
    let mut rendered = String::from(PROMPT_HEADER);
    if !feature_lines.is_empty() {
        rendered.push('\n');
        for line in &feature_lines {
            rendered.push_str("- ");
            rendered.push_str(line);
            rendered.push('\n');
        }
    }
    Prompt {
        block_id,
        feature_lines,
        rendered,
    }
}
