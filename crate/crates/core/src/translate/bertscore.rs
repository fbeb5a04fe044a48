//! Greedy-matching BERTScore over token embeddings.
//!
//! No idf weighting and no baseline rescaling: precision is the mean over
//! candidate tokens of their best cosine match in the reference, recall the
//! mean over reference tokens of their best match in the candidate, and F1
//! their harmonic mean.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("embedding set is empty; score undefined")]
    Empty,
    #[error("embedding dimensions differ ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("token {0} has a zero or non-finite embedding and cannot be normalized")]
    ZeroVector(usize),
}

/// Ordered token embeddings of one sentence, unit-normalized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self, ScoreError> {
        let Some(first) = vectors.first() else {
            return Err(ScoreError::Empty);
        };
        let dim = first.len();
        if dim == 0 {
            return Err(ScoreError::ZeroVector(0));
        }
        let mut normalized = Vec::with_capacity(vectors.len());
        for (i, v) in vectors.into_iter().enumerate() {
            if v.len() != dim {
                return Err(ScoreError::Dimension(dim, v.len()));
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(ScoreError::ZeroVector(i));
            }
            normalized.push(v.into_iter().map(|x| x / norm).collect());
        }
        Ok(Self { vectors: normalized })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn bert_score(candidate: &EmbeddingSet, reference: &EmbeddingSet) -> Result<BertScore, ScoreError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(ScoreError::Empty);
    }
    if candidate.dim() != reference.dim() {
        return Err(ScoreError::Dimension(candidate.dim(), reference.dim()));
    }
    // similarity[i][j] = cos(candidate_i, reference_j); vectors are unit length
    let sim: Vec<Vec<f64>> = candidate
        .vectors
        .iter()
        .map(|c| reference.vectors.iter().map(|r| dot(c, r)).collect())
        .collect();

    let precision = sim
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / candidate.len() as f64;
    let recall = (0..reference.len())
        .map(|j| sim.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / reference.len() as f64;
    let denom = precision + recall;
    let f1 = if denom == 0.0 { 0.0 } else { 2.0 * precision * recall / denom };
    Ok(BertScore { precision, recall, f1 })
}
