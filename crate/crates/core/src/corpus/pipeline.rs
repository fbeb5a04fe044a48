//! The six-stage cleaning run.

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dedup::{f5_dedup_with, NearDupConfig};
use super::filters::{f1_license, f2_python_exclusion, f3_structure, f4_repetition, PythonPatterns, RepetitionThresholds};
use super::langid::{f6_language, HeuristicScorer, LanguageScorer};
use super::report::{PipelineReport, StageRow};
use super::{CorpusError, FilterOutcome, RawDocument, Stage};
use crate::text::{Tokenizer, WhitespaceTokenizer};

#[derive(Clone)]
pub struct PipelineConfig {
    pub tokenizer: Arc<dyn Tokenizer>,
    pub python_patterns: PythonPatterns,
    pub scorer: Arc<dyn LanguageScorer>,
    pub require_license_for_web: bool,
    pub repetition: RepetitionThresholds,
    pub near_dup: Option<NearDupConfig>,
    /// Worker threads for the per-document stages; 0 uses the global pool.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tokenizer: Arc::new(WhitespaceTokenizer),
            python_patterns: PythonPatterns::default(),
            scorer: Arc::new(HeuristicScorer),
            require_license_for_web: false,
            repetition: RepetitionThresholds::default(),
            near_dup: None,
            workers: 0,
        }
    }
}

impl std::fmt::Debug for PipelineConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PipelineConfig")
            .field("tokenizer", &self.tokenizer.name())
            .field("python_patterns", &self.python_patterns.names())
            .field("require_license_for_web", &self.require_license_for_web)
            .field("repetition", &self.repetition)
            .field("near_dup", &self.near_dup)
            .field("workers", &self.workers)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentOutcome {
    pub id: String,
    pub outcome: FilterOutcome,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub refined: Vec<RawDocument>,
    pub report: PipelineReport,
    /// One entry per dropped document, in stage then input order.
    pub dropped: Vec<DocumentOutcome>,
    /// Kept documents that carry a flag (vacuous pass, classifier failure).
    pub flagged: Vec<DocumentOutcome>,
}

fn check_document(doc: &RawDocument, stage: Stage, config: &PipelineConfig) -> FilterOutcome {
    match stage {
        Stage::F1 => f1_license(doc, config.require_license_for_web),
        Stage::F2 => f2_python_exclusion(doc, &config.python_patterns),
        Stage::F3 => f3_structure(doc),
        Stage::F4 => f4_repetition(doc, &config.repetition),
        Stage::F6 => f6_language(doc, config.scorer.as_ref()),
        Stage::F5 => unreachable!("F5 is corpus-level"),
    }
}

struct Run<'a> {
    config: &'a PipelineConfig,
    dropped: Vec<DocumentOutcome>,
    flagged: Vec<DocumentOutcome>,
    rows: Vec<StageRow>,
}

impl Run<'_> {
    fn per_document(&mut self, docs: Vec<RawDocument>, stage: Stage) -> Vec<RawDocument> {
        let outcomes: Vec<FilterOutcome> =
            docs.par_iter().map(|d| check_document(d, stage, self.config)).collect();
        let mut kept = Vec::with_capacity(docs.len());
        let mut dropped = 0;
        let mut flagged = 0;
        for (doc, outcome) in docs.into_iter().zip(outcomes) {
            if outcome.kept {
                if outcome.flag.is_some() {
                    flagged += 1;
                    self.flagged.push(DocumentOutcome { id: doc.id.clone(), outcome });
                }
                kept.push(doc);
            } else {
                dropped += 1;
                self.dropped.push(DocumentOutcome { id: doc.id, outcome });
            }
        }
        self.record(stage, &kept, dropped, flagged);
        kept
    }

    fn dedup(&mut self, docs: Vec<RawDocument>) -> Vec<RawDocument> {
        let (kept, dropped_ids) = f5_dedup_with(docs, self.config.near_dup.as_ref());
        let reason = if self.config.near_dup.is_some() {
            "duplicate or near-duplicate of an earlier document"
        } else {
            "duplicate of an earlier document"
        };
        let dropped = dropped_ids.len() as u64;
        self.dropped.extend(
            dropped_ids
                .into_iter()
                .map(|id| DocumentOutcome { id, outcome: FilterOutcome::dropped(Stage::F5, reason) }),
        );
        self.record(Stage::F5, &kept, dropped, 0);
        kept
    }

    fn record(&mut self, stage: Stage, kept: &[RawDocument], dropped: u64, flagged: u64) {
        self.rows.push(StageRow {
            stage,
            description: stage.description().to_string(),
            tokens: kept.iter().map(|d| d.token_count).sum(),
            samples: kept.len() as u64,
            dropped,
            flagged,
        });
    }
}

/// Applies F1..F6 in order and accounts for what survives each stage.
///
/// Token counts are recomputed with the configured tokenizer first so the
/// report is consistent with the documents it describes. Output is identical
/// for any worker count.
pub fn run_pipeline(mut corpus: Vec<RawDocument>, config: &PipelineConfig) -> Result<PipelineOutput, CorpusError> {
    let mut ids = HashSet::with_capacity(corpus.len());
    for doc in &corpus {
        if !ids.insert(doc.id.as_str()) {
            return Err(CorpusError::Config(format!("duplicate document id `{}`", doc.id)));
        }
    }

    let pool = if config.workers > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| CorpusError::Config(e.to_string()))?,
        )
    } else {
        None
    };

    let body = move || {
        corpus.par_iter_mut().for_each(|d| d.recount(config.tokenizer.as_ref()));
        let input_tokens = corpus.iter().map(|d| d.token_count).sum();
        let input_samples = corpus.len() as u64;
        let mut run = Run { config, dropped: Vec::new(), flagged: Vec::new(), rows: Vec::new() };
        let mut docs = corpus;
        for stage in [Stage::F1, Stage::F2, Stage::F3, Stage::F4] {
            docs = run.per_document(docs, stage);
        }
        docs = run.dedup(docs);
        docs = run.per_document(docs, Stage::F6);
        PipelineOutput {
            refined: docs,
            report: PipelineReport {
                tokenizer: config.tokenizer.name(),
                input_tokens,
                input_samples,
                rows: run.rows,
            },
            dropped: run.dropped,
            flagged: run.flagged,
        }
    };

    Ok(match pool {
        Some(pool) => pool.install(body),
        None => body(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus_reports_zeros() {
        let out = run_pipeline(Vec::new(), &PipelineConfig::default()).unwrap();
        assert!(out.refined.is_empty());
        assert_eq!(out.report.input_tokens, 0);
        assert_eq!(out.report.rows.len(), 6);
        assert!(out.report.rows.iter().all(|r| r.tokens == 0 && r.samples == 0));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let tok = WhitespaceTokenizer;
        let d = RawDocument::new("x", "s", super::super::OriginKind::Blog, None, "a", &tok);
        assert!(matches!(run_pipeline(vec![d.clone(), d], &PipelineConfig::default()), Err(CorpusError::Config(_))));
    }
}
