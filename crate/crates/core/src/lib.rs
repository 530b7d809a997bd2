//! Static triage pipeline for anti-dynamic-analysis code in x86 Windows binaries.
//!
//! The pipeline loads a 32-bit PE image (or a text fixture), recovers functions
//! and basic blocks, extracts natural-language evidence per block (uncommon
//! instructions, segment-register accesses, string references, resolved API
//! calls), asks a rating backend to score each block from 0 to 10, and emits a
//! ranked breakpoint report for reverse engineers.
//!
//! Modules mirror the pipeline stages:
//!
//! * [`loader`]: PE32 parsing, fixture manifests, packing heuristics
//! * [`disasm`]: x86-32 decoding, CFG recovery, backward register tracing
//! * [`features`]: per-block evidence extraction (assembly / strings / APIs)
//! * [`rating`]: prompt assembly and pluggable 0-10 rating backends
//! * [`report`]: orchestration, report emission, corpus evaluation

pub mod disasm;
pub mod features;
pub mod loader;
pub mod rating;
pub mod report;

/// Virtual address inside a loaded 32-bit image.
pub type Va = u32;

pub use loader::{BinaryImage, PackerHeuristicConfig, PackingAssessment, PackingVerdict};
pub use rating::{RatingConfig, RatingRecord};
pub use report::{analyze, AnalyzeConfig, Report};
