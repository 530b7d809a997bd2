//! Ground-truth manifests and corpus-level detection statistics.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::rating::RatingBackend;
use crate::Va;

use super::{analyze, AnalyzeConfig, PipelineError, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum TadaTactic {
    DebuggerEvasion,
    SandboxEvasion,
    VmEvasion,
    AnalysisToolEvasion,
}

impl TadaTactic {
    pub fn parse(text: &str) -> Option<TadaTactic> {
        match text.to_ascii_lowercase().as_str() {
            "debugger" | "debugger-evasion" => Some(TadaTactic::DebuggerEvasion),
            "sandbox" | "sandbox-evasion" => Some(TadaTactic::SandboxEvasion),
            "vm" | "vm-evasion" => Some(TadaTactic::VmEvasion),
            "analysis-tool" | "analysis-tool-evasion" | "tool" => {
                Some(TadaTactic::AnalysisToolEvasion)
            }
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TadaTactic::DebuggerEvasion => "debugger-evasion",
            TadaTactic::SandboxEvasion => "sandbox-evasion",
            TadaTactic::VmEvasion => "vm-evasion",
            TadaTactic::AnalysisToolEvasion => "analysis-tool-evasion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum ImplKind {
    Assembly,
    DirectApi,
    IndirectApi,
}

impl ImplKind {
    pub fn parse(text: &str) -> Option<ImplKind> {
        match text.to_ascii_lowercase().as_str() {
            "assembly" | "asm" => Some(ImplKind::Assembly),
            "direct-api" | "direct" => Some(ImplKind::DirectApi),
            "indirect-api" | "indirect" => Some(ImplKind::IndirectApi),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ImplKind::Assembly => "assembly",
            ImplKind::DirectApi => "direct-api",
            ImplKind::IndirectApi => "indirect-api",
        }
    }
}

/// One TADA implementation with its ground-truth block ranges.
#[derive(Debug, Clone)]
pub struct GroundTruthEntry {
    pub id: String,
    pub binary: PathBuf,
    pub fixture: bool,
    pub tactic: TadaTactic,
    pub kind: ImplKind,
    pub involves_string: bool,
    /// Half-open `[start, end)` virtual-address ranges.
    pub bb_ranges: Vec<(Va, Va)>,
}

impl GroundTruthEntry {
    pub fn covers(&self, va: Va) -> bool {
        self.bb_ranges.iter().any(|&(s, e)| va >= s && va < e)
    }
}

#[derive(Debug, Clone)]
pub struct CorpusManifest {
    pub entries: Vec<GroundTruthEntry>,
}

impl CorpusManifest {
    /// Parse the section-per-implementation text format:
    ///
    /// ```text
    /// [impl cpuid_vm_check]
    /// binary = corpus/cpuid_vm_check.tfx
    /// format = fixture
    /// tactic = vm
    /// kind = assembly
    /// involves_string = false
    /// range = 0x401000..0x401010
    /// ```
    ///
    /// Relative binary paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<CorpusManifest, PipelineError> {
        let mut entries = Vec::new();
        let mut current: Option<PartialEntry> = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .and_then(|n| n.strip_prefix("impl"))
                    .map(str::trim)
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| bad(lineno, "section must be `[impl <id>]`"))?;
                if let Some(done) = current.take() {
                    entries.push(done.finish(base_dir)?);
                }
                current = Some(PartialEntry::new(name));
                continue;
            }
            let entry = current
                .as_mut()
                .ok_or_else(|| bad(lineno, "key before any [impl] section"))?;
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad(lineno, "expected `key = value`"))?;
            match key {
                "binary" => entry.binary = Some(value.to_string()),
                "format" => {
                    entry.fixture = match value {
                        "fixture" => true,
                        "pe" => false,
                        other => return Err(bad(lineno, &format!("unknown format {other:?}"))),
                    }
                }
                "tactic" => {
                    entry.tactic = Some(
                        TadaTactic::parse(value)
                            .ok_or_else(|| bad(lineno, &format!("unknown tactic {value:?}")))?,
                    )
                }
                "kind" => {
                    entry.kind = Some(
                        ImplKind::parse(value)
                            .ok_or_else(|| bad(lineno, &format!("unknown kind {value:?}")))?,
                    )
                }
                "involves_string" => {
                    entry.involves_string = Some(match value {
                        "true" => true,
                        "false" => false,
                        other => return Err(bad(lineno, &format!("bad bool {other:?}"))),
                    })
                }
                "range" => {
                    let (start, end) = value
                        .split_once("..")
                        .ok_or_else(|| bad(lineno, "range is `start..end`"))?;
                    let start = parse_va(start).ok_or_else(|| bad(lineno, "bad range start"))?;
                    let end = parse_va(end).ok_or_else(|| bad(lineno, "bad range end"))?;
                    if end <= start {
                        return Err(bad(lineno, "empty range"));
                    }
                    entry.ranges.push((start, end));
                }
                other => return Err(bad(lineno, &format!("unknown key {other:?}"))),
            }
        }
        if let Some(done) = current.take() {
            entries.push(done.finish(base_dir)?);
        }
        if entries.is_empty() {
            return Err(PipelineError::Manifest("no [impl] sections".into()));
        }
        Ok(CorpusManifest { entries })
    }

    pub fn load(path: &Path) -> Result<CorpusManifest, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Manifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        CorpusManifest::parse(&text, base)
    }
}

struct PartialEntry {
    id: String,
    binary: Option<String>,
    fixture: bool,
    tactic: Option<TadaTactic>,
    kind: Option<ImplKind>,
    involves_string: Option<bool>,
    ranges: Vec<(Va, Va)>,
}

impl PartialEntry {
    fn new(id: &str) -> Self {
        PartialEntry {
            id: id.to_string(),
            binary: None,
            fixture: false,
            tactic: None,
            kind: None,
            involves_string: None,
            ranges: Vec::new(),
        }
    }

    fn finish(self, base_dir: &Path) -> Result<GroundTruthEntry, PipelineError> {
        let id = self.id;
        let missing =
            |what: &str| PipelineError::Manifest(format!("[impl {id}]: missing {what}"));
        if self.ranges.is_empty() {
            return Err(missing("range"));
        }
        let mut sorted = self.ranges.clone();
        sorted.sort_unstable();
        for pair in sorted.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(PipelineError::Manifest(format!(
                    "[impl {id}]: overlapping ranges"
                )));
            }
        }
        let binary = self.binary.ok_or_else(|| missing("binary"))?;
        let tactic = self.tactic.ok_or_else(|| missing("tactic"))?;
        let kind = self.kind.ok_or_else(|| missing("kind"))?;
        let involves_string = self.involves_string.ok_or_else(|| missing("involves_string"))?;
        Ok(GroundTruthEntry {
            id,
            binary: base_dir.join(binary),
            fixture: self.fixture,
            tactic,
            kind,
            involves_string,
            bb_ranges: sorted,
        })
    }
}

fn bad(lineno: usize, message: &str) -> PipelineError {
    PipelineError::Manifest(format!("line {}: {message}", lineno + 1))
}

fn parse_va(text: &str) -> Option<Va> {
    let t = text.trim();
    if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Va::from_str_radix(hex, 16).ok()
    } else {
        t.parse().ok()
    }
}

/// detected / total with the rate as a percentage rounded to 2 decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateLine {
    pub detected: usize,
    pub total: usize,
    pub rate: f64,
}

impl RateLine {
    fn compute(detected: usize, total: usize) -> RateLine {
        let rate = if total == 0 {
            0.0
        } else {
            (detected as f64 * 100.0 / total as f64 * 100.0).round() / 100.0
        };
        RateLine {
            detected,
            total,
            rate,
        }
    }
}

/// Detection rates aggregated over a corpus.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusStats {
    pub overall: RateLine,
    pub per_tactic: BTreeMap<String, RateLine>,
    pub per_kind: BTreeMap<String, RateLine>,
    pub with_string: RateLine,
    pub without_string: RateLine,
}

/// The per-implementation outcome feeding aggregation.
#[derive(Debug, Clone)]
pub struct DetectionOutcome {
    pub id: String,
    pub tactic: TadaTactic,
    pub kind: ImplKind,
    pub involves_string: bool,
    pub detected: bool,
}

/// Aggregate detection outcomes into per-category rates.
pub fn aggregate_outcomes(outcomes: &[DetectionOutcome]) -> CorpusStats {
    let count = |pred: &dyn Fn(&DetectionOutcome) -> bool| -> (usize, usize) {
        let total = outcomes.iter().filter(|o| pred(o)).count();
        let detected = outcomes.iter().filter(|o| pred(o) && o.detected).count();
        (detected, total)
    };

    let (d, t) = count(&|_| true);
    let overall = RateLine::compute(d, t);

    let mut per_tactic = BTreeMap::new();
    for tactic in [
        TadaTactic::DebuggerEvasion,
        TadaTactic::SandboxEvasion,
        TadaTactic::VmEvasion,
        TadaTactic::AnalysisToolEvasion,
    ] {
        let (d, t) = count(&|o| o.tactic == tactic);
        per_tactic.insert(tactic.name().to_string(), RateLine::compute(d, t));
    }

    let mut per_kind = BTreeMap::new();
    for kind in [ImplKind::Assembly, ImplKind::DirectApi, ImplKind::IndirectApi] {
        let (d, t) = count(&|o| o.kind == kind);
        per_kind.insert(kind.name().to_string(), RateLine::compute(d, t));
    }

    let (d, t) = count(&|o| o.involves_string);
    let with_string = RateLine::compute(d, t);
    let (d, t) = count(&|o| !o.involves_string);
    let without_string = RateLine::compute(d, t);

    CorpusStats {
        overall,
        per_tactic,
        per_kind,
        with_string,
        without_string,
    }
}

/// Analyze every binary in the manifest and score detection: an
/// implementation counts as detected iff some positive block start falls in
/// one of its ranges.
pub fn evaluate_corpus(
    manifest: &CorpusManifest,
    backend: &dyn RatingBackend,
    config: &AnalyzeConfig,
) -> Result<CorpusStats, PipelineError> {
    let mut reports: BTreeMap<(PathBuf, bool), Report> = BTreeMap::new();
    let mut outcomes = Vec::with_capacity(manifest.entries.len());

    for entry in &manifest.entries {
        let key = (entry.binary.clone(), entry.fixture);
        if !reports.contains_key(&key) {
            let mut entry_config = config.clone();
            entry_config.fixture = entry.fixture;
            let report = analyze(&entry.binary, backend, &entry_config)?;
            reports.insert(key.clone(), report);
        }
        let report = &reports[&key];
        let detected = report.positives.iter().any(|&va| entry.covers(va));
        outcomes.push(DetectionOutcome {
            id: entry.id.clone(),
            tactic: entry.tactic,
            kind: entry.kind,
            involves_string: entry.involves_string,
            detected,
        });
    }
    Ok(aggregate_outcomes(&outcomes))
}
