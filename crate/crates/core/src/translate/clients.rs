//! Client contracts for translation, quality estimation and embeddings.

use serde::{Deserialize, Serialize};

use super::bertscore::EmbeddingSet;
use super::TargetLanguage;
use crate::client::ClientError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MtRequest {
    pub text: String,
    pub source_lang: TargetLanguage,
    pub target_lang: TargetLanguage,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MtResponse {
    pub candidates: Vec<String>,
}

pub trait MtClient: Send + Sync {
    fn id(&self) -> &str;

    /// Whether the system claims proper support for the language. Unsupported
    /// languages still receive whatever the system returns, scored by
    /// BERTScore alone.
    fn supports(&self, language: TargetLanguage) -> bool;

    fn translate(&self, request: &MtRequest) -> Result<MtResponse, ClientError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QeRequest {
    pub source: String,
    pub candidate: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QeResponse {
    pub score: f64,
}

/// Reference-free translation quality estimation.
pub trait QeClient: Send + Sync {
    fn score(&self, request: &QeRequest) -> Result<QeResponse, ClientError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
}

/// Token embeddings; the provider decides the tokenization.
pub trait EmbeddingClient: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingSet, ClientError>;
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic offline embeddings: whitespace tokens, lowercased and
/// stripped of surrounding punctuation, each hashed to a fixed vector with
/// components in [-1, 1). Equal tokens get equal vectors.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedding {
    pub dim: usize,
}

impl Default for HashEmbedding {
    fn default() -> Self {
        Self { dim: 32 }
    }
}

impl HashEmbedding {
    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let base = fnv1a(token.as_bytes());
        (0..self.dim as u64)
            .map(|i| {
                let bits = mix(base ^ mix(i)) >> 11;
                (bits as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }
}

impl EmbeddingClient for HashEmbedding {
    fn embed(&self, text: &str) -> Result<EmbeddingSet, ClientError> {
        let vectors: Vec<Vec<f64>> = text
            .split_whitespace()
            .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
            .filter(|t| !t.is_empty())
            .map(|t| self.token_vector(&t))
            .collect();
        EmbeddingSet::new(vectors).map_err(|e| ClientError::BadResponse(e.to_string()))
    }
}
