//! Corpus cleaning: ingestion from a source manifest and the six sequential
//! filters (license, Python exclusion, structure, repetition, dedup,
//! language) with per-stage token accounting.

mod blocks;
mod dedup;
mod filters;
mod ingest;
mod langid;
mod pipeline;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blocks::{paragraphs, segment_blocks, Block, BlockKind};
pub use dedup::{f5_dedup, f5_dedup_with, NearDupConfig};
pub use filters::{
    f1_license, f2_python_exclusion, f3_structure, f4_repetition, normalize_license, PatternScope,
    PythonPattern, PythonPatterns, RepetitionThresholds, APACHE_2_0,
};
pub use ingest::{
    detect_license, ingest_sources, read_manifest, Fetcher, IngestResult, ManifestEntry, NoFetcher,
    SkipRecord,
};
pub use langid::{f6_language, CommandScorer, HeuristicScorer, LanguageGuess, LanguageScorer, ScorerError};
pub use pipeline::{run_pipeline, DocumentOutcome, PipelineConfig, PipelineOutput};
pub use report::{PipelineReport, StageRow};

use crate::text::Tokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginKind {
    Repository,
    Documentation,
    Blog,
    Other,
}

impl FromStr for OriginKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "repository" | "repo" => Ok(Self::Repository),
            "documentation" | "docs" => Ok(Self::Documentation),
            "blog" => Ok(Self::Blog),
            "other" => Ok(Self::Other),
            _ => Err(format!("unknown origin kind `{s}`")),
        }
    }
}

/// One unit of scraped text or code flowing through the filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub source_ref: String,
    pub origin_kind: OriginKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub license_tag: Option<String>,
    pub body: String,
    #[serde(default)]
    pub token_count: u64,
}

impl RawDocument {
    pub fn new(
        id: impl Into<String>,
        source_ref: impl Into<String>,
        origin_kind: OriginKind,
        license_tag: Option<String>,
        body: impl Into<String>,
        tokenizer: &dyn Tokenizer,
    ) -> Self {
        let body = body.into();
        let token_count = tokenizer.count(&body) as u64;
        Self {
            id: id.into(),
            source_ref: source_ref.into(),
            origin_kind,
            license_tag,
            body,
            token_count,
        }
    }

    pub fn recount(&mut self, tokenizer: &dyn Tokenizer) {
        self.token_count = tokenizer.count(&self.body) as u64;
    }

    /// True when the source is a Mojo file (`.mojo` or `.🔥`).
    pub fn is_mojo_source(&self) -> bool {
        self.source_ref.ends_with(".mojo") || self.source_ref.ends_with(".🔥")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::F1, Stage::F2, Stage::F3, Stage::F4, Stage::F5, Stage::F6];

    pub fn description(self) -> &'static str {
        match self {
            Stage::F1 => "Removes non-Apache 2.0 licensed samples.",
            Stage::F2 => "Removes Python-specific code snippets.",
            Stage::F3 => "Ensures samples have at least 3 meaningful paragraphs.",
            Stage::F4 => "Removes samples with excessive internal repetition.",
            Stage::F5 => "Removes duplicate samples across the corpus.",
            Stage::F6 => "Filters non-English content.",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Stage::F1 => "F1",
            Stage::F2 => "F2",
            Stage::F3 => "F3",
            Stage::F4 => "F4",
            Stage::F5 => "F5",
            Stage::F6 => "F6",
        })
    }
}

/// Verdict of one filter on one document.
///
/// `reason` is empty exactly when the document is kept. `flag` carries a
/// non-fatal observation (vacuous pass, classifier failure) for the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub stage: Stage,
    pub kept: bool,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl FilterOutcome {
    pub fn kept(stage: Stage) -> Self {
        Self { stage, kept: true, reason: String::new(), flag: None }
    }

    pub fn dropped(stage: Stage, reason: impl Into<String>) -> Self {
        let reason = reason.into();
        debug_assert!(!reason.is_empty());
        Self { stage, kept: false, reason, flag: None }
    }

    pub fn flagged(mut self, flag: impl Into<String>) -> Self {
        self.flag = Some(flag.into());
        self
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid pattern `{pattern}`: {source}")]
    InvalidPattern {
        pattern: String,
        #[source]
        source: Box<regex::Error>,
    },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("corpus file line {line}: {message}")]
    CorpusFile { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a line-delimited corpus file of [`RawDocument`] records.
pub fn read_corpus(path: &std::path::Path) -> Result<Vec<RawDocument>, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    let mut docs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(line)
            .map_err(|e| CorpusError::CorpusFile { line: idx + 1, message: e.to_string() })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus(path: &std::path::Path, docs: &[RawDocument]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serde_json::to_string(doc).expect("document serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
