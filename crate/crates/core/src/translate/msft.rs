use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clients::{EmbeddingClient, MtClient, QeClient};
use super::select::{
    back_translate, generate_candidates, score_candidate, select_best, ScoreWeights, SelectionError, DEFAULT_CANDIDATES,
};
use super::{TargetLanguage, TranslationCandidate};
use crate::client::RetryPolicy;
use crate::sft::InstructionPair;

#[derive(Debug, Clone)]
pub struct TranslateConfig {
    pub candidates_per_system: usize,
    pub weights: ScoreWeights,
    pub retry: RetryPolicy,
    /// 0 means the global rayon pool.
    pub workers: usize,
}

impl Default for TranslateConfig {
    fn default() -> Self {
        Self {
            candidates_per_system: DEFAULT_CANDIDATES,
            weights: ScoreWeights::default(),
            retry: RetryPolicy::default(),
            workers: 0,
        }
    }
}

/// Every candidate considered for one prompt in one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolAudit {
    pub prompt_id: String,
    pub language: TargetLanguage,
    /// Position of the winner in `candidates`.
    pub winner: Option<usize>,
    pub candidates: Vec<TranslationCandidate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub prompt_id: String,
    pub snippet_id: String,
    pub variant_index: u8,
    pub language: TargetLanguage,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsftOutput {
    pub records: Vec<InstructionPair>,
    pub audit: Vec<PoolAudit>,
    pub gaps: Vec<Gap>,
}

fn prompt_id(pair: &InstructionPair) -> String {
    format!("{}#{}", pair.snippet_id, pair.variant_index)
}

enum PoolOutcome {
    Selected(InstructionPair, PoolAudit),
    Unresolved(Gap, PoolAudit),
}

fn translate_one(
    pair: &InstructionPair,
    language: TargetLanguage,
    systems: &[Arc<dyn MtClient>],
    qe: Option<&dyn QeClient>,
    embedder: &dyn EmbeddingClient,
    config: &TranslateConfig,
) -> PoolOutcome {
    let id = prompt_id(pair);
    let mut notes = Vec::new();
    let mut pool: Vec<TranslationCandidate> = Vec::new();
    let gap = |reason: String| Gap {
        prompt_id: id.clone(),
        snippet_id: pair.snippet_id.clone(),
        variant_index: pair.variant_index,
        language,
        reason,
    };

    let source_embeddings = match embedder.embed(&pair.prompt) {
        Ok(e) => e,
        Err(e) => {
            let reason = format!("source prompt could not be embedded: {e}");
            let audit = PoolAudit { prompt_id: id.clone(), language, winner: None, candidates: pool, notes: vec![reason.clone()] };
            return PoolOutcome::Unresolved(gap(reason), audit);
        }
    };

    for system in systems {
        let system = system.as_ref();
        // QE only on systems that properly support the language
        let qe_here = if system.supports(language) { qe } else { None };
        if !system.supports(language) {
            notes.push(format!("{}: {language} unsupported, scored by BERTScore only", system.id()));
        }
        let batch = match generate_candidates(
            &id,
            &pair.prompt,
            system,
            language,
            config.candidates_per_system,
            &config.retry,
        ) {
            Ok(b) => b,
            Err(e) => {
                notes.push(format!("{}: no candidates ({e})", system.id()));
                continue;
            }
        };
        if batch.exhausted {
            notes.push(format!(
                "{}: exhausted after {} of {} candidates",
                system.id(),
                batch.candidates.len(),
                config.candidates_per_system
            ));
        }
        for mut candidate in batch.candidates {
            if back_translate(&mut candidate, system, &config.retry).is_ok() {
                score_candidate(
                    &mut candidate,
                    &pair.prompt,
                    &source_embeddings,
                    embedder,
                    qe_here,
                    &config.weights,
                    &config.retry,
                );
            }
            pool.push(candidate);
        }
    }

    match select_best(&id, language, pool) {
        Ok(result) => {
            let winner = result.audit.iter().position(|c| c.system == result.winner.system && c.index == result.winner.index);
            let record = InstructionPair {
                snippet_id: pair.snippet_id.clone(),
                variant_index: pair.variant_index,
                language: language.tag().to_string(),
                prompt: result.winner.text.clone(),
                code: pair.code.clone(),
            };
            PoolOutcome::Selected(record, PoolAudit { prompt_id: id, language, winner, candidates: result.audit, notes })
        }
        Err(SelectionError::Empty { .. }) => {
            let reason = "no system produced candidates".to_string();
            let g = gap(reason);
            PoolOutcome::Unresolved(g, PoolAudit { prompt_id: id, language, winner: None, candidates: Vec::new(), notes })
        }
        Err(SelectionError::AllExcluded { candidates, .. }) => {
            let reason = "every candidate was excluded".to_string();
            let g = gap(reason);
            PoolOutcome::Unresolved(g, PoolAudit { prompt_id: id, language, winner: None, candidates, notes })
        }
    }
}

/// Translates every English pair into each non-English language, keeping the
/// best round-trip candidate per pair and language. Code is copied verbatim.
///
/// Output order is the input pair order, then language order. Unresolved
/// pairs are left out of `records` and listed in `gaps`.
pub fn build_msft(
    pairs: &[InstructionPair],
    languages: &[TargetLanguage],
    systems: &[Arc<dyn MtClient>],
    qe: Option<&dyn QeClient>,
    embedder: &dyn EmbeddingClient,
    config: &TranslateConfig,
) -> Result<MsftOutput, String> {
    config.weights.validate()?;
    if config.candidates_per_system == 0 {
        return Err("candidates per system must be at least 1".into());
    }
    if systems.is_empty() {
        return Err("at least one translation system is required".into());
    }
    let mut targets: Vec<TargetLanguage> = Vec::new();
    for &l in languages {
        if l != TargetLanguage::En && !targets.contains(&l) {
            targets.push(l);
        }
    }
    let jobs: Vec<(&InstructionPair, TargetLanguage)> = pairs
        .iter()
        .filter(|p| p.language == TargetLanguage::En.tag())
        .flat_map(|p| targets.iter().map(move |&l| (p, l)))
        .collect();

    let run = || -> Vec<PoolOutcome> {
        jobs.par_iter().map(|&(p, l)| translate_one(p, l, systems, qe, embedder, config)).collect()
    };
    let outcomes = if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| e.to_string())?
            .install(run)
    } else {
        run()
    };

    let mut out = MsftOutput { records: Vec::new(), audit: Vec::new(), gaps: Vec::new() };
    for outcome in outcomes {
        match outcome {
            PoolOutcome::Selected(record, audit) => {
                out.records.push(record);
                out.audit.push(audit);
            }
            PoolOutcome::Unresolved(gap, audit) => {
                tracing::warn!(prompt = gap.prompt_id, language = %gap.language, "unresolved: {}", gap.reason);
                out.gaps.push(gap);
                out.audit.push(audit);
            }
        }
    }
    Ok(out)
}

pub fn write_audit(path: &Path, audit: &[PoolAudit]) -> std::io::Result<()> {
    let mut text = String::new();
    for a in audit {
        text.push_str(&serde_json::to_string(a).expect("audit serializes"));
        text.push('\n');
    }
    std::fs::write(path, text)
}

pub fn read_audit(path: &Path) -> std::io::Result<Vec<PoolAudit>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::ClientError;
    use crate::sft::pairs_for_snippet;
    use crate::translate::clients::{HashEmbedding, MtRequest, MtResponse};
    use crate::translate::stub::{StubMt, StubQe};

    fn systems() -> Vec<Arc<dyn MtClient>> {
        vec![Arc::new(StubMt::new("a")), Arc::new(StubMt::new("b")), Arc::new(StubMt::new("c"))]
    }

    fn dataset(n: usize) -> Vec<InstructionPair> {
        (0..n)
            .flat_map(|i| {
                let v: Vec<String> =
                    (1..=4).map(|j| format!("Write a function number {i} that adds list items, phrasing {j}")).collect();
                pairs_for_snippet(&format!("s{i}"), "fn f(): pass", &v)
            })
            .collect()
    }

    #[test]
    fn pools_of_fifteen_and_counts() {
        let pairs = dataset(2);
        let langs = [TargetLanguage::Es, TargetLanguage::De, TargetLanguage::Fr, TargetLanguage::Bn];
        let out = build_msft(&pairs, &langs, &systems(), Some(&StubQe), &HashEmbedding::default(), &TranslateConfig::default())
            .unwrap();
        assert_eq!(out.records.len(), 4 * pairs.len());
        assert!(out.gaps.is_empty());
        for a in &out.audit {
            assert_eq!(a.candidates.len(), 15);
            let w = &a.candidates[a.winner.unwrap()];
            for c in &a.candidates {
                assert!(c.combined.unwrap() <= w.combined.unwrap());
            }
        }
        assert!(out.records.iter().all(|r| r.code == "fn f(): pass"));
        assert_eq!(out.records[0].language, "es");
        assert_eq!(out.records[1].language, "de");
    }

    /// Works until asked to translate the poisoned prompt.
    struct Poisoned(StubMt, &'static str);
    impl MtClient for Poisoned {
        fn id(&self) -> &str {
            self.0.id()
        }
        fn supports(&self, l: TargetLanguage) -> bool {
            self.0.supports(l)
        }
        fn translate(&self, r: &MtRequest) -> Result<MtResponse, ClientError> {
            if r.text.contains(self.1) && r.target_lang == TargetLanguage::Bn {
                return Err(ClientError::Unreachable("down".into()));
            }
            self.0.translate(r)
        }
    }

    #[test]
    fn unresolved_prompt_becomes_a_gap() {
        let pairs = dataset(2);
        let systems: Vec<Arc<dyn MtClient>> = vec![Arc::new(Poisoned(StubMt::new("a"), "number 1 that adds list items, phrasing 3"))];
        let langs = [TargetLanguage::Es, TargetLanguage::De, TargetLanguage::Fr, TargetLanguage::Bn];
        let config = TranslateConfig { retry: RetryPolicy::immediate(), ..Default::default() };
        let out = build_msft(&pairs, &langs, &systems, None, &HashEmbedding::default(), &config).unwrap();
        assert_eq!(out.records.len(), 4 * pairs.len() - 1);
        assert_eq!(out.gaps.len(), 1);
        assert_eq!(out.gaps[0].prompt_id, "s1#3");
        assert_eq!(out.gaps[0].language, TargetLanguage::Bn);
    }
}
