//! Report rendering: versioned JSON for machines, aligned text for humans.

use serde::Serialize;

use crate::loader::PackingVerdict;

use super::{CorpusStats, PipelineError, Report};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

impl ReportFormat {
    pub fn parse(text: &str) -> Option<ReportFormat> {
        match text {
            "json" => Some(ReportFormat::Json),
            "text" => Some(ReportFormat::Text),
            _ => None,
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema_version: u32,
    input_digest: &'a str,
    backend: &'a str,
    threshold: u8,
    packing: JsonPacking<'a>,
    total_blocks: usize,
    records: Vec<JsonRecord<'a>>,
    positives: Vec<String>,
}

#[derive(Serialize)]
struct JsonPacking<'a> {
    verdict: &'static str,
    packer: Option<&'a str>,
    libraries: usize,
    functions: usize,
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    block: String,
    function: String,
    features: Vec<&'a str>,
    prompt_sha256: &'a str,
    rating: u8,
    positive: bool,
}

fn verdict_name(verdict: PackingVerdict) -> &'static str {
    match verdict {
        PackingVerdict::NotPacked => "NotPacked",
        PackingVerdict::HeuristicPacked => "HeuristicPacked",
        PackingVerdict::KnownPacker => "KnownPacker",
    }
}

fn hex_va(va: crate::Va) -> String {
    format!("0x{va:08x}")
}

/// Render the report. Identical reports yield identical bytes.
pub fn emit_report(report: &Report, format: ReportFormat) -> Result<Vec<u8>, PipelineError> {
    match format {
        ReportFormat::Json => {
            let json = JsonReport {
                schema_version: REPORT_SCHEMA_VERSION,
                input_digest: &report.input_digest,
                backend: &report.backend_id,
                threshold: report.threshold,
                packing: JsonPacking {
                    verdict: verdict_name(report.packing.verdict),
                    packer: report.packing.packer_name.as_deref(),
                    libraries: report.packing.library_count,
                    functions: report.packing.function_count,
                },
                total_blocks: report.total_blocks,
                records: report
                    .records
                    .iter()
                    .map(|r| JsonRecord {
                        block: hex_va(r.block),
                        function: hex_va(r.function),
                        features: r.features.iter().map(|f| f.text.as_str()).collect(),
                        prompt_sha256: &r.prompt_sha256,
                        rating: r.rating,
                        positive: r.positive,
                    })
                    .collect(),
                positives: report.positives.iter().map(|&va| hex_va(va)).collect(),
            };
            let mut bytes = serde_json::to_vec_pretty(&json)
                .map_err(|e| PipelineError::Output(e.to_string()))?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        ReportFormat::Text => Ok(render_text(report).into_bytes()),
    }
}

fn render_text(report: &Report) -> String {
    let mut out = String::new();
    out.push_str("anti-dynamic-analysis breakpoint report\n");
    out.push_str(&format!("input:    {}\n", report.input_digest));
    out.push_str(&format!("backend:  {}\n", report.backend_id));
    let packing = &report.packing;
    out.push_str(&format!(
        "packing:  {} (libraries={}, functions={}{})\n",
        verdict_name(packing.verdict),
        packing.library_count,
        packing.function_count,
        packing
            .packer_name
            .as_deref()
            .map(|p| format!(", packer={p}"))
            .unwrap_or_default(),
    ));
    out.push_str(&format!(
        "blocks:   {} total, {} rated, {} positive (threshold {})\n",
        report.total_blocks,
        report.records.len(),
        report.positives.len(),
        report.threshold,
    ));
    if packing.is_packed() {
        out.push_str("\nanalysis halted: unpack the sample before re-running\n");
        return out;
    }
    out.push_str("\nbreakpoints (positive blocks, ascending):\n");
    if report.positives.is_empty() {
        out.push_str("  none\n");
    }
    for record in report.records.iter().filter(|r| r.positive) {
        out.push_str(&format!(
            "  {}  rating {:>2}  function {}\n",
            hex_va(record.block),
            record.rating,
            hex_va(record.function)
        ));
        for feature in &record.features {
            out.push_str(&format!("      - {}\n", feature.text));
        }
    }
    let negatives: Vec<_> = report.records.iter().filter(|r| !r.positive).collect();
    if !negatives.is_empty() {
        out.push_str("\nrated below threshold:\n");
        for record in negatives {
            out.push_str(&format!(
                "  {}  rating {:>2}  ({} features)\n",
                hex_va(record.block),
                record.rating,
                record.features.len()
            ));
        }
    }
    out
}

/// Render corpus statistics.
pub fn emit_stats(stats: &CorpusStats, format: ReportFormat) -> Result<Vec<u8>, PipelineError> {
    match format {
        ReportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(stats)
                .map_err(|e| PipelineError::Output(e.to_string()))?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        ReportFormat::Text => {
            let mut out = String::new();
            let line = |r: &super::RateLine| format!("{}/{} ({:.2}%)", r.detected, r.total, r.rate);
            out.push_str("corpus detection rates\n");
            out.push_str(&format!("overall:         {}\n", line(&stats.overall)));
            out.push_str("per tactic:\n");
            for (name, rate) in &stats.per_tactic {
                out.push_str(&format!("  {name:<24} {}\n", line(rate)));
            }
            out.push_str("per implementation kind:\n");
            for (name, rate) in &stats.per_kind {
                out.push_str(&format!("  {name:<24} {}\n", line(rate)));
            }
            out.push_str(&format!("involving strings:  {}\n", line(&stats.with_string)));
            out.push_str(&format!("no strings:         {}\n", line(&stats.without_string)));
            Ok(out.into_bytes())
        }
    }
}
