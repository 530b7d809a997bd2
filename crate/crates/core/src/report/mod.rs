//! Pipeline orchestration and the breakpoint report.

mod emit;
mod ground_truth;

pub use emit::{emit_report, emit_stats, ReportFormat};
pub use ground_truth::{
    aggregate_outcomes, evaluate_corpus, CorpusManifest, CorpusStats, DetectionOutcome,
    GroundTruthEntry, ImplKind, RateLine, TadaTactic,
};

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::disasm::{
    build_cfg, disassemble_function, discover_functions, BasicBlock, ControlFlowGraph,
};
use crate::features::api::{resolve_call_feature, ApiKnowledgeBase};
use crate::features::asm::{scan_segment_access, scan_uncommon_mnemonics, AugmentationTable};
use crate::features::emulate::emulate_for_strings;
use crate::features::strings::{extract_plain_strings, should_emulate, EmulationTriggerConfig};
use crate::features::{render_string_feature, Feature, FeatureKind};
use crate::loader::{
    detect_packing, load_fixture, parse_pe, BinaryImage, FormatKind, PackerHeuristicConfig,
    PackingAssessment, PackingVerdict,
};
use crate::rating::{
    build_prompt, prompt_hash, Prompt, PromptCache, RatingBackend, RatingConfig, RatingEngine,
};
use crate::Va;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("load stage: {0}")]
    Load(String),
    #[error("rating stage: {0}")]
    Rating(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("output: {0}")]
    Output(String),
}

impl PipelineError {
    /// CLI exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Load(_) | PipelineError::Manifest(_) => 3,
            PipelineError::Rating(_) => 4,
            PipelineError::Output(_) => 3,
        }
    }
}

/// Everything the pipeline needs besides the backend.
#[derive(Debug, Clone, Default)]
pub struct AnalyzeConfig {
    /// Treat the input as a fixture manifest instead of a PE file.
    pub fixture: bool,
    pub packer: PackerHeuristicConfig,
    pub triggers: EmulationTriggerConfig,
    pub rating: RatingConfig,
    pub knowledge_base: ApiKnowledgeBase,
    /// Write each rated block's full prompt into this directory.
    pub dump_prompts: Option<PathBuf>,
    /// Persist backend responses here, keyed by prompt hash.
    pub cache_path: Option<PathBuf>,
}

/// One rated block.
#[derive(Debug, Clone)]
pub struct BlockRecord {
    pub block: Va,
    pub function: Va,
    pub features: Vec<Feature>,
    pub prompt_sha256: String,
    pub rating: u8,
    pub positive: bool,
}

/// The breakpoint report for one binary.
#[derive(Debug, Clone)]
pub struct Report {
    pub input_digest: String,
    pub backend_id: String,
    pub threshold: u8,
    pub packing: PackingAssessment,
    pub total_blocks: usize,
    pub records: Vec<BlockRecord>,
    /// Ascending, deduplicated start addresses of positive blocks.
    pub positives: Vec<Va>,
}

/// Load a file (PE or fixture manifest) and run the full pipeline.
pub fn analyze(
    path: &Path,
    backend: &dyn RatingBackend,
    config: &AnalyzeConfig,
) -> Result<Report, PipelineError> {
    let bytes = fs::read(path)
        .map_err(|e| PipelineError::Load(format!("{}: {e}", path.display())))?;
    let image = if config.fixture {
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| PipelineError::Load("fixture manifest is not UTF-8".into()))?;
        load_fixture(&text).map_err(|e| PipelineError::Load(e.to_string()))?
    } else {
        parse_pe(&bytes).map_err(|e| PipelineError::Load(e.to_string()))?
    };
    analyze_image(&image, &bytes, backend, config)
}

/// Run the pipeline over an already-loaded image.
pub fn analyze_image(
    image: &BinaryImage,
    input_bytes: &[u8],
    backend: &dyn RatingBackend,
    config: &AnalyzeConfig,
) -> Result<Report, PipelineError> {
    let input_digest = format!("sha256:{}", hex::encode(Sha256::digest(input_bytes)));

    // Packing gate applies to real PE images; fixtures are synthetic and
    // proceed regardless of their tiny import tables.
    let packing = match image.format_kind {
        FormatKind::Pe32 => detect_packing(image, &config.packer),
        FormatKind::RawFixture => PackingAssessment {
            verdict: PackingVerdict::NotPacked,
            packer_name: None,
            library_count: image.imports.distinct_library_count(),
            function_count: image.imports.entries.len(),
        },
    };
    if packing.is_packed() {
        return Ok(Report {
            input_digest,
            backend_id: backend.id(),
            threshold: config.rating.threshold,
            packing,
            total_blocks: 0,
            records: Vec::new(),
            positives: Vec::new(),
        });
    }

    let entries = discover_functions(image);
    let analyses: Vec<FunctionAnalysis> = entries
        .par_iter()
        .filter_map(|&entry| analyze_function(image, entry, config))
        .collect();

    let total_blocks: usize = analyses.iter().map(|a| a.block_count).sum();

    // Blocks with features, in stable (block, function) order.
    let mut pending: Vec<PendingBlock> = Vec::new();
    for analysis in &analyses {
        for (block, features) in &analysis.featured_blocks {
            let prompt = build_prompt(
                crate::disasm::BlockId {
                    function_entry: analysis.entry,
                    start: *block,
                },
                features,
            );
            pending.push((*block, analysis.entry, features.clone(), prompt));
        }
    }
    pending.sort_by_key(|(block, function, _, _)| (*block, *function));

    if let Some(dir) = &config.dump_prompts {
        fs::create_dir_all(dir).map_err(|e| PipelineError::Output(e.to_string()))?;
        for (block, function, _, prompt) in &pending {
            let file = dir.join(format!("{function:08x}_{block:08x}.txt"));
            fs::write(file, &prompt.rendered)
                .map_err(|e| PipelineError::Output(e.to_string()))?;
        }
    }

    let mut engine = RatingEngine::new(backend, config.rating.clone());
    if let Some(path) = &config.cache_path {
        let cache = PromptCache::open(path)
            .map_err(|e| PipelineError::Output(format!("cache: {e}")))?;
        engine = engine.with_cache(cache);
    }
    let prompts: Vec<Prompt> = pending.iter().map(|(_, _, _, p)| p.clone()).collect();
    let ratings = engine
        .rate_all(&prompts)
        .map_err(|e| PipelineError::Rating(e.to_string()))?;

    let mut records: Vec<BlockRecord> = pending
        .into_iter()
        .zip(ratings)
        .map(|((block, function, features, prompt), rating)| BlockRecord {
            block,
            function,
            features,
            prompt_sha256: prompt_hash(&prompt.rendered),
            rating: rating.rating,
            positive: rating.positive,
        })
        .collect();
    records.sort_by_key(|r| (r.block, r.function));

    let mut positives: Vec<Va> = records
        .iter()
        .filter(|r| r.positive)
        .map(|r| r.block)
        .collect();
    positives.sort_unstable();
    positives.dedup();

    Ok(Report {
        input_digest,
        backend_id: backend.id(),
        threshold: config.rating.threshold,
        packing,
        total_blocks,
        records,
        positives,
    })
}

/// `(block start, function entry, features, prompt)` awaiting a rating.
type PendingBlock = (Va, Va, Vec<Feature>, Prompt);

struct FunctionAnalysis {
    entry: Va,
    block_count: usize,
    /// Blocks that produced at least one feature, with features in prompt
    /// order: assembly, then strings, then APIs, each by address.
    featured_blocks: Vec<(Va, Vec<Feature>)>,
}

fn analyze_function(
    image: &BinaryImage,
    entry: Va,
    config: &AnalyzeConfig,
) -> Option<FunctionAnalysis> {
    let disasm = disassemble_function(image, entry).ok()?;
    let cfg = build_cfg(&disasm, entry);
    let table = AugmentationTable::default();

    // Emulated strings, grouped per attributed block.
    let mut emulated: std::collections::BTreeMap<Va, Vec<Feature>> = Default::default();
    if should_emulate(&cfg, image, &config.triggers).is_some() {
        let outcome = emulate_for_strings(&cfg, &disasm, image, &config.triggers);
        for s in outcome.strings {
            emulated
                .entry(s.attributed_block.start)
                .or_default()
                .push(Feature::new(
                    FeatureKind::StringRef,
                    render_string_feature(&s.value),
                    s.attributed_block,
                    s.source_address,
                ));
        }
    }

    let mut featured_blocks = Vec::new();
    for block in cfg.blocks.values() {
        let features = block_features(block, &cfg, image, config, &table, emulated.remove(&block.start()));
        if !features.is_empty() {
            featured_blocks.push((block.start(), features));
        }
    }

    Some(FunctionAnalysis {
        entry,
        block_count: cfg.blocks.len(),
        featured_blocks,
    })
}

fn block_features(
    block: &BasicBlock,
    cfg: &ControlFlowGraph,
    image: &BinaryImage,
    config: &AnalyzeConfig,
    table: &AugmentationTable,
    emulated: Option<Vec<Feature>>,
) -> Vec<Feature> {
    // assembly features, merged across both scans by address
    let mut asm = scan_uncommon_mnemonics(block, table);
    asm.extend(scan_segment_access(block, table));
    asm.sort_by_key(|f| (f.source_address, f.kind));

    // strings: plain references first, then emulated recoveries
    let mut strings = extract_plain_strings(block, image, &config.triggers);
    if let Some(extra) = emulated {
        for feature in extra {
            if !strings.iter().any(|f| f.text == feature.text) {
                strings.push(feature);
            }
        }
    }

    // API calls by address
    let mut apis = Vec::new();
    for ins in &block.instructions {
        if ins.is_call() {
            if let Some(feature) =
                resolve_call_feature(ins, block, cfg, image, &config.knowledge_base)
            {
                apis.push(feature);
            }
        }
    }

    let mut features = asm;
    features.extend(strings);
    features.extend(apis);
    features
}
