//! F6: natural-language identification over the text blocks of a document.

use std::io::Write;
use std::process::{Command, Stdio};

use thiserror::Error;

use super::blocks::{segment_blocks, BlockKind};
use super::{FilterOutcome, RawDocument, Stage};

pub const MIN_ENGLISH_CONFIDENCE: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageGuess {
    pub label: String,
    pub confidence: f64,
}

impl LanguageGuess {
    pub fn new(label: impl Into<String>, confidence: f64) -> Self {
        Self { label: label.into(), confidence }
    }

    pub fn is_english(&self) -> bool {
        let label = self.label.trim().trim_start_matches("__label__").to_ascii_lowercase();
        matches!(label.as_str(), "en" | "eng" | "english")
    }
}

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("language scorer failed: {0}")]
    Failed(String),
}

pub trait LanguageScorer: Send + Sync {
    fn score(&self, text: &str) -> Result<LanguageGuess, ScorerError>;
}

impl<F> LanguageScorer for F
where
    F: Fn(&str) -> Result<LanguageGuess, ScorerError> + Send + Sync,
{
    fn score(&self, text: &str) -> Result<LanguageGuess, ScorerError> {
        self(text)
    }
}

/// F6: keeps documents whose prose is English with confidence of at least 0.4.
///
/// Only text blocks are classified. Scorer failures keep the document and
/// flag it, as does a document with no prose to classify.
pub fn f6_language(doc: &RawDocument, scorer: &dyn LanguageScorer) -> FilterOutcome {
    let prose: Vec<String> = segment_blocks(&doc.body)
        .into_iter()
        .filter(|b| b.kind == BlockKind::Text)
        .map(|b| b.content)
        .collect();
    if prose.is_empty() {
        return FilterOutcome::kept(Stage::F6).flagged("no text blocks to classify");
    }
    match scorer.score(&prose.join("\n\n")) {
        Ok(guess) if guess.is_english() && guess.confidence >= MIN_ENGLISH_CONFIDENCE => {
            FilterOutcome::kept(Stage::F6)
        }
        Ok(guess) => FilterOutcome::dropped(
            Stage::F6,
            format!("language {} ({:.2})", guess.label, guess.confidence),
        ),
        Err(err) => {
            tracing::warn!(doc = %doc.id, error = %err, "language scorer failed; keeping document");
            FilterOutcome::kept(Stage::F6).flagged(format!("scorer failure: {err}"))
        }
    }
}

const EN: &[&str] = &[
    "the", "and", "of", "to", "a", "in", "is", "it", "that", "for", "you", "with", "on", "this",
    "are", "as", "be", "we", "can", "from", "an", "by", "or", "not", "have", "will", "use", "which",
    "how", "your", "at", "our", "these", "when", "more", "if", "also", "has", "into", "its",
];
const ES: &[&str] = &[
    "el", "la", "de", "que", "y", "en", "los", "las", "del", "se", "por", "un", "una", "para", "con",
    "es", "al", "lo", "como", "más", "pero", "sus", "le", "ya", "o", "este", "sí", "porque", "esta",
];
const DE: &[&str] = &[
    "der", "die", "und", "in", "den", "von", "zu", "das", "mit", "sich", "des", "auf", "für", "ist",
    "im", "dem", "nicht", "ein", "eine", "als", "auch", "es", "an", "werden", "aus", "er", "hat",
    "dass", "sie", "nach", "wird", "bei",
];
const FR: &[&str] = &[
    "le", "de", "un", "à", "être", "et", "en", "avoir", "que", "pour", "dans", "ce", "il", "qui",
    "ne", "sur", "se", "pas", "plus", "par", "je", "avec", "tout", "faire", "son", "mettre", "autre",
    "on", "mais", "nous", "comme", "ou", "si", "leur", "les", "des", "est", "une", "la", "du",
];

/// Offline stop-word scorer used when no classifier plugin is configured.
///
/// Confidence is twice the share of words that are function words of the
/// winning language, capped at one. Bengali is recognized by script.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicScorer;

impl LanguageScorer for HeuristicScorer {
    fn score(&self, text: &str) -> Result<LanguageGuess, ScorerError> {
        let letters = text.chars().filter(|c| c.is_alphabetic()).count();
        let bengali = text.chars().filter(|c| ('\u{0980}'..='\u{09FF}').contains(c)).count();
        if letters > 0 && bengali * 2 > letters {
            return Ok(LanguageGuess::new("bn", bengali as f64 / letters as f64));
        }
        let words: Vec<String> = text
            .split(|c: char| !c.is_alphabetic())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        if words.is_empty() {
            return Ok(LanguageGuess::new("und", 0.0));
        }
        let tables = [("en", EN), ("es", ES), ("de", DE), ("fr", FR)];
        let (label, hits) = tables
            .iter()
            .map(|(label, list)| (*label, words.iter().filter(|w| list.contains(&w.as_str())).count()))
            .fold(("und", 0usize), |best, cur| if cur.1 > best.1 { cur } else { best });
        let confidence = (2.0 * hits as f64 / words.len() as f64).min(1.0);
        Ok(LanguageGuess::new(label, confidence))
    }
}

/// Runs an external classifier (for example a fastText wrapper).
///
/// The command reads text on stdin and prints `<label> <confidence>`;
/// a `__label__` prefix on the label is accepted.
#[derive(Debug, Clone)]
pub struct CommandScorer {
    argv: Vec<String>,
}

impl CommandScorer {
    pub fn new(command: &str) -> Option<Self> {
        let argv = shlex::split(command)?;
        (!argv.is_empty()).then_some(Self { argv })
    }
}

impl LanguageScorer for CommandScorer {
    fn score(&self, text: &str) -> Result<LanguageGuess, ScorerError> {
        let fail = |e: &dyn std::fmt::Display| ScorerError::Failed(e.to_string());
        let mut child = Command::new(&self.argv[0])
            .args(&self.argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| fail(&e))?;
        if let Some(mut stdin) = child.stdin.take() {
            stdin.write_all(text.as_bytes()).map_err(|e| fail(&e))?;
        }
        let out = child.wait_with_output().map_err(|e| fail(&e))?;
        if !out.status.success() {
            return Err(ScorerError::Failed(format!("classifier exited with {}", out.status)));
        }
        let stdout = String::from_utf8_lossy(&out.stdout);
        let mut parts = stdout.split_whitespace();
        let label = parts.next().ok_or_else(|| fail(&"empty classifier output"))?;
        let confidence: f64 = parts
            .next()
            .ok_or_else(|| fail(&"missing confidence"))?
            .parse()
            .map_err(|e| fail(&e))?;
        Ok(LanguageGuess::new(label.trim_start_matches("__label__"), confidence))
    }
}
