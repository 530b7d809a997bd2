//! API call features: direct IAT resolution, indirect resolution through the
//! backward register trace, stdcall argument recovery, and rendering.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::disasm::{
    BasicBlock, ControlFlowGraph, Flow, Instruction, Operand, ValueSource,
};
use crate::loader::BinaryImage;
use crate::Va;

use super::strings::{read_ascii_string, read_utf16_string};
use super::{Feature, FeatureKind};

/// Built-in knowledge base of TADA-relevant API signatures.
const BUILTIN_KNOWLEDGE: &str = include_str!("../../data/api_kb.txt");

#[derive(Debug, Error)]
pub enum KnowledgeBaseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StringWidth {
    Ansi,
    Wide,
}

/// One documented signature: name, home library, argument count, and which
/// argument slots are string pointers.
#[derive(Debug, Clone)]
pub struct ApiSignature {
    pub name: String,
    pub library: String,
    pub arg_count: usize,
    pub string_args: Vec<(usize, StringWidth)>,
}

/// Signature lookup, seeded from the built-in file; user files merge over it.
#[derive(Debug, Clone)]
pub struct ApiKnowledgeBase {
    signatures: BTreeMap<String, ApiSignature>,
}

impl Default for ApiKnowledgeBase {
    fn default() -> Self {
        ApiKnowledgeBase::parse(BUILTIN_KNOWLEDGE)
            .expect("built-in API knowledge base must parse")
    }
}

impl ApiKnowledgeBase {
    /// Parse the record format: `name|library|arg_count|idx:a,idx:w,...`
    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<ApiKnowledgeBase, KnowledgeBaseError> {
        let mut kb = ApiKnowledgeBase {
            signatures: BTreeMap::new(),
        };
        kb.merge(text)?;
        Ok(kb)
    }

    /// Merge records from `text`, overriding existing names.
    pub fn merge(&mut self, text: &str) -> Result<(), KnowledgeBaseError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split('|').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(KnowledgeBaseError::Malformed {
                    line: lineno + 1,
                    message: "expected `name|library|arg_count|string_args`".into(),
                });
            }
            let arg_count: usize =
                parts[2]
                    .parse()
                    .map_err(|_| KnowledgeBaseError::Malformed {
                        line: lineno + 1,
                        message: format!("bad arg count {:?}", parts[2]),
                    })?;
            let mut string_args = Vec::new();
            if !parts[3].is_empty() {
                for spec in parts[3].split(',') {
                    let (idx, width) =
                        spec.trim()
                            .split_once(':')
                            .ok_or_else(|| KnowledgeBaseError::Malformed {
                                line: lineno + 1,
                                message: format!("bad string-arg spec {spec:?}"),
                            })?;
                    let idx: usize = idx.parse().map_err(|_| KnowledgeBaseError::Malformed {
                        line: lineno + 1,
                        message: format!("bad string-arg index {idx:?}"),
                    })?;
                    if idx >= arg_count {
                        return Err(KnowledgeBaseError::Malformed {
                            line: lineno + 1,
                            message: format!("string-arg index {idx} >= arg count {arg_count}"),
                        });
                    }
                    let width = match width {
                        "a" => StringWidth::Ansi,
                        "w" => StringWidth::Wide,
                        other => {
                            return Err(KnowledgeBaseError::Malformed {
                                line: lineno + 1,
                                message: format!("bad string width {other:?}"),
                            })
                        }
                    };
                    string_args.push((idx, width));
                }
            }
            self.signatures.insert(
                parts[0].to_string(),
                ApiSignature {
                    name: parts[0].to_string(),
                    library: parts[1].to_string(),
                    arg_count,
                    string_args,
                },
            );
        }
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<&ApiSignature> {
        self.signatures.get(name)
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgValue {
    Immediate(u32),
    StringPtr(String),
    Unknown,
}

/// A call site resolved to an API name with recovered arguments.
#[derive(Debug, Clone)]
pub struct ResolvedCall {
    pub site: Va,
    pub api: String,
    pub args: Vec<ArgValue>,
    /// False when fewer pushes were found than the signature demands.
    pub args_complete: bool,
}

/// Direct resolution: the call's memory operand (or direct target) is an IAT
/// slot.
pub fn resolve_direct_call(ins: &Instruction, image: &BinaryImage) -> Option<String> {
    match ins.flow {
        Flow::CallIndirect => {
            let mem = ins.operands.first()?.as_memory()?;
            let slot = mem.absolute()?;
            image.imports.symbol_at_slot(slot).map(str::to_string)
        }
        Flow::Call(target) => image.imports.symbol_at_slot(target).map(str::to_string),
        _ => None,
    }
}

/// Indirect resolution: trace the call register backward; a load from an IAT
/// slot names the import. A Concrete value would have to match the slot's
/// run-time contents, which a static pipeline cannot see, so those stay
/// unresolved.
pub fn resolve_indirect_call(
    ins: &Instruction,
    cfg: &ControlFlowGraph,
    image: &BinaryImage,
) -> Option<String> {
    if ins.flow != Flow::CallIndirect {
        return None;
    }
    let reg = ins.operands.first()?.as_register()?;
    match crate::disasm::trace_register_back(cfg, ins.address, reg.reg) {
        ValueSource::LoadFrom(addr) => image.imports.symbol_at_slot(addr).map(str::to_string),
        ValueSource::Concrete(_) | ValueSource::Unknown => None,
    }
}

/// Walk backward from the call collecting `push` instructions: the stdcall
/// argument slots, last-pushed first. Crosses into a unique predecessor block
/// at most once and stops at any intervening call.
pub fn collect_pushes(cfg: &ControlFlowGraph, site: Va, limit: usize) -> Vec<&Instruction> {
    let mut pushes = Vec::new();
    let Some(block) = cfg.block_containing(site) else {
        return pushes;
    };
    let Some(site_index) = block.instructions.iter().position(|i| i.address == site) else {
        return pushes;
    };

    let mut crossed = false;
    let mut current = block;
    let mut index = site_index;
    loop {
        for ins in current.instructions[..index].iter().rev() {
            if pushes.len() >= limit {
                return pushes;
            }
            if ins.is_call() {
                return pushes;
            }
            if ins.mnemonic == "push" {
                pushes.push(ins);
            }
        }
        if pushes.len() >= limit || crossed {
            return pushes;
        }
        let preds = cfg.predecessors(current.start());
        if preds.len() != 1 || preds[0] == current.start() {
            return pushes;
        }
        crossed = true;
        current = &cfg.blocks[&preds[0]];
        index = current.instructions.len();
    }
}

/// Observed pushes for calls without a known signature (placeholder args).
pub fn observed_push_count(cfg: &ControlFlowGraph, site: Va) -> usize {
    collect_pushes(cfg, site, 8).len()
}

/// Recover up to `signature.arg_count` stdcall arguments for the call at
/// `site`. `args[0]` is the leftmost (last-pushed) parameter.
pub fn recover_arguments(
    cfg: &ControlFlowGraph,
    site: Va,
    signature: &ApiSignature,
    image: &BinaryImage,
) -> (Vec<ArgValue>, bool) {
    let pushes = collect_pushes(cfg, site, signature.arg_count);
    let complete = pushes.len() >= signature.arg_count;

    let mut args = Vec::with_capacity(pushes.len());
    for (index, push) in pushes.iter().enumerate() {
        let value = match push.operands.first() {
            Some(Operand::Immediate { value, .. }) => Some(*value as u32),
            _ => None,
        };
        let arg = match value {
            Some(v) => {
                let width = signature
                    .string_args
                    .iter()
                    .find(|(i, _)| *i == index)
                    .map(|(_, w)| *w);
                match width {
                    Some(w) if image.is_mapped(v) => match read_arg_string(image, v, w) {
                        Some(text) => ArgValue::StringPtr(text),
                        None => ArgValue::Immediate(v),
                    },
                    _ => ArgValue::Immediate(v),
                }
            }
            None => ArgValue::Unknown,
        };
        args.push(arg);
    }
    (args, complete)
}

/// Argument strings only need to be nonempty, printable, NUL-terminated.
fn read_arg_string(image: &BinaryImage, va: Va, width: StringWidth) -> Option<String> {
    match width {
        StringWidth::Ansi => read_ascii_string(image, va, 1),
        StringWidth::Wide => read_utf16_string(image, va, 1),
    }
}

/// Resolve one call instruction in `block` to a rendered feature, if the
/// callee maps to an import.
pub fn resolve_call_feature(
    ins: &Instruction,
    block: &BasicBlock,
    cfg: &ControlFlowGraph,
    image: &BinaryImage,
    kb: &ApiKnowledgeBase,
) -> Option<Feature> {
    let name = resolve_direct_call(ins, image)
        .or_else(|| resolve_indirect_call(ins, cfg, image))?;
    let call = match kb.lookup(&name) {
        Some(signature) => {
            let (args, complete) = recover_arguments(cfg, ins.address, signature, image);
            ResolvedCall {
                site: ins.address,
                api: name,
                args,
                args_complete: complete,
            }
        }
        None => {
            // unknown signature: placeholders for each observed push
            let count = observed_push_count(cfg, ins.address);
            ResolvedCall {
                site: ins.address,
                api: name,
                args: vec![ArgValue::Unknown; count],
                args_complete: false,
            }
        }
    };
    Some(Feature::new(
        FeatureKind::ApiCall,
        render_api_feature(&call),
        block.id,
        ins.address,
    ))
}

/// `Called API: Name(arg, ...)`; strings quoted, immediates decimal (hex
/// above 4095), unknowns as `<unknown>`.
pub fn render_api_feature(call: &ResolvedCall) -> String {
    let args: Vec<String> = call
        .args
        .iter()
        .map(|a| match a {
            ArgValue::Immediate(v) => {
                if *v > 4095 {
                    format!("{v:#x}")
                } else {
                    format!("{v}")
                }
            }
            ArgValue::StringPtr(text) => format!("\"{}\"", text.replace('"', "\\\"")),
            ArgValue::Unknown => "<unknown>".to_string(),
        })
        .collect();
    format!("Called API: {}({})", call.api, args.join(", "))
}
