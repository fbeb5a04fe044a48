//! Multilingual prompt translation with round-trip scoring and best-of-pool
//! selection.

mod bertscore;
mod clients;
mod msft;
mod select;
pub mod stub;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bertscore::{bert_score, BertScore, EmbeddingSet, ScoreError};
pub use clients::{
    EmbedRequest, EmbedResponse, EmbeddingClient, HashEmbedding, MtClient, MtRequest, MtResponse, QeClient, QeRequest,
    QeResponse,
};
pub use msft::{build_msft, read_audit, write_audit, Gap, MsftOutput, PoolAudit, TranslateConfig};
pub use select::{
    back_translate, generate_candidates, qe_score, score_candidate, select_best, CandidateBatch, QeOutcome,
    ScoreWeights, SelectionError, SelectionResult, DEFAULT_CANDIDATES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetLanguage {
    En,
    Es,
    De,
    Fr,
    Bn,
}

impl TargetLanguage {
    pub const ALL: [TargetLanguage; 5] = [Self::En, Self::Es, Self::De, Self::Fr, Self::Bn];

    pub fn tag(self) -> &'static str {
        match self {
            Self::En => "en",
            Self::Es => "es",
            Self::De => "de",
            Self::Fr => "fr",
            Self::Bn => "bn",
        }
    }
}

impl fmt::Display for TargetLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for TargetLanguage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unsupported language `{s}` (expected one of en, es, de, fr, bn)"))
    }
}

/// One translated prompt and everything measured about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationCandidate {
    pub prompt_id: String,
    pub system: String,
    pub language: TargetLanguage,
    /// Position within the system's batch, 0-based.
    pub index: usize,
    pub text: String,
    pub back_translation: Option<String>,
    pub bert_p: Option<f64>,
    pub bert_r: Option<f64>,
    pub bert_f1: Option<f64>,
    pub qe_score: Option<f64>,
    pub combined: Option<f64>,
    /// Why the candidate cannot win, if it cannot.
    pub excluded: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TranslationCandidate {
    pub fn new(prompt_id: &str, system: &str, language: TargetLanguage, index: usize, text: String) -> Self {
        Self {
            prompt_id: prompt_id.to_string(),
            system: system.to_string(),
            language,
            index,
            text,
            back_translation: None,
            bert_p: None,
            bert_r: None,
            bert_f1: None,
            qe_score: None,
            combined: None,
            excluded: None,
            notes: Vec::new(),
        }
    }

    pub fn is_eligible(&self) -> bool {
        self.excluded.is_none() && self.combined.is_some()
    }
}
