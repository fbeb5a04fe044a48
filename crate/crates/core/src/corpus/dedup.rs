//! F5: corpus-level duplicate removal.
//!
//! Exact matching on whitespace-normalized bodies, with an optional MinHash
//! near-duplicate pass. Both keep the first occurrence in input order.

use std::collections::{HashMap, HashSet};

use super::RawDocument;
use crate::text::normalize_whitespace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearDupConfig {
    /// Words per shingle.
    pub shingle_size: usize,
    pub bands: usize,
    pub rows_per_band: usize,
    /// Estimated Jaccard similarity at or above which a document is dropped.
    pub threshold: f64,
}

impl Default for NearDupConfig {
    fn default() -> Self {
        Self { shingle_size: 5, bands: 16, rows_per_band: 8, threshold: 0.8 }
    }
}

/// Exact dedup. Returns the survivors and the ids that were dropped.
pub fn f5_dedup(corpus: Vec<RawDocument>) -> (Vec<RawDocument>, Vec<String>) {
    f5_dedup_with(corpus, None)
}

pub fn f5_dedup_with(
    corpus: Vec<RawDocument>,
    near: Option<&NearDupConfig>,
) -> (Vec<RawDocument>, Vec<String>) {
    let mut seen: HashSet<String> = HashSet::with_capacity(corpus.len());
    let mut index = near.map(|cfg| MinHashIndex::new(*cfg));
    let mut kept = Vec::with_capacity(corpus.len());
    let mut dropped = Vec::new();
    for doc in corpus {
        let key = normalize_whitespace(&doc.body);
        if !seen.insert(key.clone()) {
            dropped.push(doc.id);
            continue;
        }
        if let Some(index) = index.as_mut() {
            if !index.insert_if_novel(&key) {
                dropped.push(doc.id);
                continue;
            }
        }
        kept.push(doc);
    }
    (kept, dropped)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

struct MinHashIndex {
    cfg: NearDupConfig,
    seeds: Vec<u64>,
    signatures: Vec<Vec<u64>>,
    buckets: HashMap<(usize, u64), Vec<usize>>,
}

impl MinHashIndex {
    fn new(cfg: NearDupConfig) -> Self {
        let n = cfg.bands * cfg.rows_per_band;
        let seeds = (0..n as u64).map(|i| splitmix(i ^ 0x5eed)).collect();
        Self { cfg, seeds, signatures: Vec::new(), buckets: HashMap::new() }
    }

    fn signature(&self, normalized: &str) -> Vec<u64> {
        let words: Vec<&str> = normalized.split(' ').filter(|w| !w.is_empty()).collect();
        let size = self.cfg.shingle_size.max(1);
        let shingles: Vec<u64> = if words.len() <= size {
            vec![fnv1a(words.join(" ").as_bytes())]
        } else {
            words.windows(size).map(|w| fnv1a(w.join(" ").as_bytes())).collect()
        };
        self.seeds
            .iter()
            .map(|seed| shingles.iter().map(|s| splitmix(s ^ seed)).min().unwrap_or(u64::MAX))
            .collect()
    }

    fn band_keys(&self, sig: &[u64]) -> Vec<(usize, u64)> {
        sig.chunks(self.cfg.rows_per_band)
            .enumerate()
            .map(|(band, rows)| {
                let mut h = 0u64;
                for r in rows {
                    h = splitmix(h ^ r);
                }
                (band, h)
            })
            .collect()
    }

    /// Registers the document unless it is a near duplicate of one already
    /// registered. Returns whether it was registered.
    fn insert_if_novel(&mut self, normalized: &str) -> bool {
        let sig = self.signature(normalized);
        let keys = self.band_keys(&sig);
        let mut checked = HashSet::new();
        for key in &keys {
            if let Some(members) = self.buckets.get(key) {
                for &m in members {
                    if !checked.insert(m) {
                        continue;
                    }
                    let other = &self.signatures[m];
                    let same = sig.iter().zip(other).filter(|(a, b)| a == b).count();
                    if same as f64 / sig.len() as f64 >= self.cfg.threshold {
                        return false;
                    }
                }
            }
        }
        let id = self.signatures.len();
        self.signatures.push(sig);
        for key in keys {
            self.buckets.entry(key).or_default().push(id);
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::OriginKind;
    use crate::text::WhitespaceTokenizer;

    fn doc(id: &str, body: &str) -> RawDocument {
        RawDocument::new(id, "src", OriginKind::Blog, None, body, &WhitespaceTokenizer)
    }

    fn ids(docs: &[RawDocument]) -> Vec<&str> {
        docs.iter().map(|d| d.id.as_str()).collect()
    }

    #[test]
    fn exact_duplicates_keep_first() {
        let (kept, dropped) = f5_dedup(vec![doc("a1", "A"), doc("a2", "A"), doc("b", "B")]);
        assert_eq!(ids(&kept), ["a1", "b"]);
        assert_eq!(dropped, ["a2"]);
    }

    #[test]
    fn trailing_whitespace_is_normalized() {
        let (kept, dropped) = f5_dedup(vec![doc("a", "fn  main():\n  pass"), doc("a'", "fn main(): pass  \n")]);
        assert_eq!(ids(&kept), ["a"]);
        assert_eq!(dropped, ["a'"]);
    }

    #[test]
    fn case_is_preserved() {
        let (kept, _) = f5_dedup(vec![doc("a", "Hello"), doc("b", "hello")]);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn near_duplicates_removed_when_enabled() {
        let base: String = (0..200).map(|i| format!("w{i} ")).collect();
        let tweaked = base.replacen("w100 ", "changed ", 1);
        let corpus = vec![doc("a", &base), doc("b", &tweaked), doc("c", "entirely different text here")];
        let (kept, _) = f5_dedup(corpus.clone());
        assert_eq!(kept.len(), 3);
        let (kept, dropped) = f5_dedup_with(corpus, Some(&NearDupConfig::default()));
        assert_eq!(ids(&kept), ["a", "c"]);
        assert_eq!(dropped, ["b"]);
    }
}
