use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::card::{scan_source, DatasetCard, SourceFeatures};
use super::SftError;
use crate::text::Tokenizer;

pub const VARIANTS_PER_SNIPPET: usize = 4;

/// A (natural-language prompt, code) training pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionPair {
    pub snippet_id: String,
    /// 1-based.
    pub variant_index: u8,
    pub language: String,
    pub prompt: String,
    pub code: String,
}

/// English pairs for one snippet, one per prompt variant, numbered from 1.
pub fn pairs_for_snippet(snippet_id: &str, code: &str, variants: &[String]) -> Vec<InstructionPair> {
    variants
        .iter()
        .enumerate()
        .map(|(i, prompt)| InstructionPair {
            snippet_id: snippet_id.to_string(),
            variant_index: (i + 1) as u8,
            language: "en".to_string(),
            prompt: prompt.clone(),
            code: code.to_string(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SftDataset {
    pub pairs: Vec<InstructionPair>,
    pub card: DatasetCard,
}

/// Validates that every snippet has exactly four non-empty variants numbered
/// 1..=4, orders the pairs, and computes the dataset card.
pub fn assemble_sft(pairs: Vec<InstructionPair>, tokenizer: &dyn Tokenizer) -> Result<SftDataset, SftError> {
    if pairs.is_empty() {
        return Err(SftError::NothingToAssemble);
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<InstructionPair>> = HashMap::new();
    for pair in pairs {
        let group = groups.entry(pair.snippet_id.clone()).or_insert_with(|| {
            order.push(pair.snippet_id.clone());
            Vec::new()
        });
        group.push(pair);
    }

    let mut offenders = Vec::new();
    for id in &order {
        let group = groups.get_mut(id).expect("grouped");
        group.sort_by_key(|p| p.variant_index);
        let indices: Vec<u8> = group.iter().map(|p| p.variant_index).collect();
        let well_formed = indices == [1, 2, 3, 4] && group.iter().all(|p| !p.prompt.trim().is_empty());
        if !well_formed {
            offenders.push(id.clone());
        }
    }
    if !offenders.is_empty() {
        return Err(SftError::VariantCount(offenders));
    }

    let ordered: Vec<InstructionPair> = order.iter().flat_map(|id| groups.remove(id).expect("grouped")).collect();
    let mut features = SourceFeatures::default();
    let tokens: Vec<u64> = ordered
        .iter()
        .map(|p| {
            features += scan_source(&p.code);
            tokenizer.count(&p.code) as u64
        })
        .collect();
    let card = DatasetCard::from_blocks(&tokens, features).expect("non-empty");
    Ok(SftDataset { pairs: ordered, card })
}

pub fn write_pairs(path: &Path, pairs: &[InstructionPair]) -> std::io::Result<()> {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p).expect("pair serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)
}

pub fn read_pairs(path: &Path) -> std::io::Result<Vec<InstructionPair>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
            })
        })
        .collect()
}
