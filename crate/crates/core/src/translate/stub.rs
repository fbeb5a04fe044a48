//! Deterministic offline clients for exercising the selector end to end.
//!
//! `StubMt` "translates" by tagging the text with the target language and
//! perturbing a hash-chosen subset of words; translating back to English
//! strips the tag. Different systems and candidate indices perturb
//! differently, so round-trip scores vary across the pool.

use super::clients::{fnv1a, mix, MtClient, MtRequest, MtResponse, QeClient, QeRequest, QeResponse};
use super::TargetLanguage;
use crate::client::ClientError;

const FILLER: &str = "thing";

#[derive(Debug, Clone)]
pub struct StubMt {
    id: String,
    supported: Vec<TargetLanguage>,
}

impl StubMt {
    /// A system that supports every language.
    pub fn new(id: &str) -> Self {
        Self { id: id.to_string(), supported: TargetLanguage::ALL.to_vec() }
    }

    pub fn supporting(id: &str, languages: &[TargetLanguage]) -> Self {
        Self { id: id.to_string(), supported: languages.to_vec() }
    }

    fn perturb(&self, text: &str, target: TargetLanguage, candidate: usize) -> String {
        let seed = fnv1a(self.id.as_bytes()) ^ mix(fnv1a(target.tag().as_bytes()));
        let words: Vec<String> = text
            .split_whitespace()
            .enumerate()
            .filter_map(|(j, w)| {
                let h = mix(seed ^ mix(((candidate as u64) << 32) | j as u64));
                match h % 6 {
                    0 => None,
                    1 => Some(FILLER.to_string()),
                    _ => Some(w.to_string()),
                }
            })
            .collect();
        let body = if words.is_empty() { FILLER.to_string() } else { words.join(" ") };
        format!("[{}] {body}", target.tag())
    }
}

fn strip_tag(text: &str) -> &str {
    let t = text.trim_start();
    match t.strip_prefix('[').and_then(|r| r.split_once("] ")) {
        Some((tag, rest)) if tag.parse::<TargetLanguage>().is_ok() => rest,
        _ => text,
    }
}

impl MtClient for StubMt {
    fn id(&self) -> &str {
        &self.id
    }

    fn supports(&self, language: TargetLanguage) -> bool {
        self.supported.contains(&language)
    }

    fn translate(&self, request: &MtRequest) -> Result<MtResponse, ClientError> {
        let candidates = if request.target_lang == TargetLanguage::En {
            vec![strip_tag(&request.text).to_string(); request.n]
        } else {
            (0..request.n).map(|i| self.perturb(&request.text, request.target_lang, i)).collect()
        };
        Ok(MtResponse { candidates })
    }
}

/// Scores the share of source words that survive in the candidate, minus a
/// small hash-derived penalty.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubQe;

impl QeClient for StubQe {
    fn score(&self, request: &QeRequest) -> Result<QeResponse, ClientError> {
        let source: Vec<String> = request.source.split_whitespace().map(str::to_lowercase).collect();
        if source.is_empty() {
            return Ok(QeResponse { score: 0.0 });
        }
        let cand: std::collections::HashSet<String> =
            strip_tag(&request.candidate).split_whitespace().map(str::to_lowercase).collect();
        let kept = source.iter().filter(|w| cand.contains(*w)).count() as f64 / source.len() as f64;
        let jitter = (mix(fnv1a(request.candidate.as_bytes())) % 1000) as f64 / 10_000.0;
        Ok(QeResponse { score: (kept - jitter).clamp(0.0, 1.0) })
    }
}
