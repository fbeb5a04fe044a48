//! Prompt paraphrasing through an external LLM client.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{ClientError, RetryPolicy};
use crate::text::normalize_whitespace;

pub const DEFAULT_SYSTEM_HINT: &str =
    "Rewrite the programming instruction in different words. Keep its meaning and every technical detail.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseRequest {
    pub system_hint: String,
    pub seed_prompt: String,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseResponse {
    pub paraphrases: Vec<String>,
}

pub trait ParaphraseProvider: Send + Sync {
    fn paraphrase(&self, request: &ParaphraseRequest) -> Result<ParaphraseResponse, ClientError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseSet {
    pub paraphrases: Vec<String>,
    /// Set when duplicates kept the set below the requested size.
    pub warning: Option<String>,
}

impl ParaphraseSet {
    /// The seed followed by its paraphrases.
    pub fn variants(&self, seed: &str) -> Vec<String> {
        std::iter::once(seed.to_string()).chain(self.paraphrases.iter().cloned()).collect()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParaphraseError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("provider unavailable, task parked for manual entry: {reason}")]
    Parked { reason: String, partial: Vec<String> },
}

fn dedup_key(text: &str) -> String {
    normalize_whitespace(text).to_lowercase()
}

/// Asks the provider for `k` paraphrases that differ from the seed and from
/// each other under whitespace/case normalization.
///
/// Duplicate-heavy responses trigger extra rounds for the missing count; when
/// those run out the set is returned short with a warning.
pub fn generate_paraphrases(
    seed_prompt: &str,
    provider: &dyn ParaphraseProvider,
    k: usize,
    policy: &RetryPolicy,
) -> Result<ParaphraseSet, ParaphraseError> {
    if k == 0 {
        return Err(ParaphraseError::InvalidK);
    }
    let mut seen: HashSet<String> = HashSet::from([dedup_key(seed_prompt)]);
    let mut accepted: Vec<String> = Vec::with_capacity(k);
    let mut duplicate_rounds = 0;

    while accepted.len() < k {
        let request = ParaphraseRequest {
            system_hint: DEFAULT_SYSTEM_HINT.to_string(),
            seed_prompt: seed_prompt.to_string(),
            k: k - accepted.len(),
        };
        let response = policy
            .run(|_| provider.paraphrase(&request))
            .map_err(|e| ParaphraseError::Parked { reason: e.to_string(), partial: accepted.clone() })?;
        for candidate in response.paraphrases {
            let trimmed = candidate.trim();
            if trimmed.is_empty() || accepted.len() == k {
                continue;
            }
            if seen.insert(dedup_key(trimmed)) {
                accepted.push(trimmed.to_string());
            }
        }
        if accepted.len() < k {
            duplicate_rounds += 1;
            if duplicate_rounds > policy.max_duplicate_retries {
                let warning = format!("only {} distinct paraphrases of {k} requested", accepted.len());
                tracing::warn!(seed = seed_prompt, "{warning}");
                return Ok(ParaphraseSet { paraphrases: accepted, warning: Some(warning) });
            }
        }
    }
    Ok(ParaphraseSet { paraphrases: accepted, warning: None })
}

/// Paraphrases many seeds with at most `max_in_flight` concurrent provider
/// calls. Results come back in input order.
pub fn generate_all(
    seeds: &[(String, String)],
    provider: &dyn ParaphraseProvider,
    k: usize,
    policy: &RetryPolicy,
    max_in_flight: usize,
) -> Vec<(String, Result<ParaphraseSet, ParaphraseError>)> {
    use rayon::prelude::*;
    let work = || {
        seeds
            .par_iter()
            .map(|(id, seed)| (id.clone(), generate_paraphrases(seed, provider, k, policy)))
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(max_in_flight.max(1)).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    }
}
