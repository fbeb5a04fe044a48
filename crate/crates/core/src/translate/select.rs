use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bertscore::{bert_score, EmbeddingSet};
use super::clients::{EmbeddingClient, MtClient, MtRequest, QeClient, QeRequest};
use super::{TargetLanguage, TranslationCandidate};
use crate::client::{ClientError, RetryPolicy};

pub const DEFAULT_CANDIDATES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBatch {
    pub candidates: Vec<TranslationCandidate>,
    /// The client stopped producing before `k` candidates were collected.
    pub exhausted: bool,
}

/// Requests `k` translations of `prompt` from one system, topping up until
/// the client returns nothing new or fails.
///
/// A failure before any candidate arrives is returned as an error so the
/// caller can park the prompt.
pub fn generate_candidates(
    prompt_id: &str,
    prompt: &str,
    client: &dyn MtClient,
    language: TargetLanguage,
    k: usize,
    policy: &RetryPolicy,
) -> Result<CandidateBatch, ClientError> {
    let mut texts: Vec<String> = Vec::with_capacity(k);
    let mut exhausted = false;
    while texts.len() < k {
        let request = MtRequest {
            text: prompt.to_string(),
            source_lang: TargetLanguage::En,
            target_lang: language,
            n: k - texts.len(),
        };
        match policy.run(|_| client.translate(&request)) {
            Ok(response) => {
                let before = texts.len();
                texts.extend(
                    response.candidates.into_iter().filter(|c| !c.trim().is_empty()).take(k - before),
                );
                if texts.len() == before {
                    exhausted = true;
                    break;
                }
            }
            Err(e) if texts.is_empty() => return Err(e),
            Err(e) => {
                tracing::warn!(prompt_id, system = client.id(), "candidate generation stopped early: {e}");
                exhausted = true;
                break;
            }
        }
    }
    let candidates = texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| TranslationCandidate::new(prompt_id, client.id(), language, i, text))
        .collect();
    Ok(CandidateBatch { candidates, exhausted })
}

/// Translates the candidate back to English. On failure the candidate is
/// marked excluded and the reason returned.
pub fn back_translate(
    candidate: &mut TranslationCandidate,
    client: &dyn MtClient,
    policy: &RetryPolicy,
) -> Result<(), String> {
    let request = MtRequest {
        text: candidate.text.clone(),
        source_lang: candidate.language,
        target_lang: TargetLanguage::En,
        n: 1,
    };
    let outcome = match policy.run(|_| client.translate(&request)) {
        Ok(r) => match r.candidates.into_iter().next() {
            Some(t) if !t.trim().is_empty() => Ok(t),
            _ => Err("empty back-translation".to_string()),
        },
        Err(e) => Err(format!("back-translation failed: {e}")),
    };
    match outcome {
        Ok(text) => {
            candidate.back_translation = Some(text);
            Ok(())
        }
        Err(reason) => {
            candidate.excluded = Some(reason.clone());
            Err(reason)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QeOutcome {
    pub score: Option<f64>,
    pub warning: Option<String>,
}

/// Asks the QE client for a score, clamped into [0, 1]. No client means no
/// score; a failing client means no score plus a warning.
pub fn qe_score(source: &str, candidate: &str, client: Option<&dyn QeClient>, policy: &RetryPolicy) -> QeOutcome {
    let Some(client) = client else {
        return QeOutcome { score: None, warning: None };
    };
    let request = QeRequest { source: source.to_string(), candidate: candidate.to_string() };
    match policy.run(|_| client.score(&request)) {
        Ok(r) if r.score.is_nan() => QeOutcome { score: None, warning: Some("quality estimate is NaN".into()) },
        Ok(r) if !(0.0..=1.0).contains(&r.score) => {
            let clamped = r.score.clamp(0.0, 1.0);
            QeOutcome {
                score: Some(clamped),
                warning: Some(format!("quality estimate {} clamped to {clamped}", r.score)),
            }
        }
        Ok(r) => QeOutcome { score: Some(r.score), warning: None },
        Err(e) => QeOutcome { score: None, warning: Some(format!("quality estimation failed: {e}")) },
    }
}

/// Relative weights of BERTScore F1 and the quality estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub bert: f64,
    pub qe: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self { bert: 0.5, qe: 0.5 }
    }
}

impl ScoreWeights {
    pub fn combine(&self, bert_f1: f64, qe: Option<f64>) -> f64 {
        match qe {
            Some(q) => (self.bert * bert_f1 + self.qe * q) / (self.bert + self.qe),
            None => bert_f1,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.bert.is_finite() && self.qe.is_finite() && self.bert > 0.0 && self.qe > 0.0 {
            Ok(())
        } else {
            Err(format!("score weights must be positive and finite, got {self:?}"))
        }
    }
}

/// Scores a back-translated candidate: BERTScore of the back-translation
/// against the English source, then QE on the forward pair when `qe` is
/// given.
#[allow(clippy::too_many_arguments)]
pub fn score_candidate(
    candidate: &mut TranslationCandidate,
    source: &str,
    source_embeddings: &EmbeddingSet,
    embedder: &dyn EmbeddingClient,
    qe: Option<&dyn QeClient>,
    weights: &ScoreWeights,
    policy: &RetryPolicy,
) {
    if candidate.excluded.is_some() {
        return;
    }
    let Some(back) = candidate.back_translation.as_deref() else {
        candidate.excluded = Some("no back-translation".into());
        return;
    };
    let score = embedder
        .embed(back)
        .map_err(|e| e.to_string())
        .and_then(|emb| bert_score(&emb, source_embeddings).map_err(|e| e.to_string()));
    let score = match score {
        Ok(s) => s,
        Err(e) => {
            candidate.excluded = Some(format!("bertscore unavailable: {e}"));
            return;
        }
    };
    candidate.bert_p = Some(score.precision);
    candidate.bert_r = Some(score.recall);
    candidate.bert_f1 = Some(score.f1);

    let outcome = qe_score(source, &candidate.text, qe, policy);
    if let Some(w) = outcome.warning {
        candidate.notes.push(w);
    }
    candidate.qe_score = outcome.score;
    candidate.combined = Some(weights.combine(score.f1, outcome.score));
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub prompt_id: String,
    pub language: TargetLanguage,
    pub winner: TranslationCandidate,
    pub losers: Vec<TranslationCandidate>,
    /// Every candidate in pool order, winner included.
    pub audit: Vec<TranslationCandidate>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("no candidates for {prompt_id} ({language})")]
    Empty { prompt_id: String, language: TargetLanguage },
    #[error("every candidate for {prompt_id} ({language}) was excluded; escalated for review")]
    AllExcluded { prompt_id: String, language: TargetLanguage, candidates: Vec<TranslationCandidate> },
}

/// Picks the candidate with the highest combined score. Candidates must be
/// in pool order (systems in configured order, then batch index); on a tie
/// the earlier one wins.
pub fn select_best(
    prompt_id: &str,
    language: TargetLanguage,
    candidates: Vec<TranslationCandidate>,
) -> Result<SelectionResult, SelectionError> {
    if candidates.is_empty() {
        return Err(SelectionError::Empty { prompt_id: prompt_id.to_string(), language });
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let Some(score) = c.combined.filter(|_| c.excluded.is_none()) else {
            continue;
        };
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    let Some((winner_at, _)) = best else {
        return Err(SelectionError::AllExcluded { prompt_id: prompt_id.to_string(), language, candidates });
    };
    let winner = candidates[winner_at].clone();
    let losers = candidates.iter().enumerate().filter(|(i, _)| *i != winner_at).map(|(_, c)| c.clone()).collect();
    Ok(SelectionResult { prompt_id: prompt_id.to_string(), language, winner, losers, audit: candidates })
}
