//! Dataset card statistics and the minimal Mojo line scanner behind them.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

/// Source features counted per code block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFeatures {
    pub full_line_comments: u64,
    pub inline_comments: u64,
    pub function_definitions: u64,
    pub struct_definitions: u64,
}

impl std::ops::AddAssign for SourceFeatures {
    fn add_assign(&mut self, rhs: Self) {
        self.full_line_comments += rhs.full_line_comments;
        self.inline_comments += rhs.inline_comments;
        self.function_definitions += rhs.function_definitions;
        self.struct_definitions += rhs.struct_definitions;
    }
}

fn is_declaration(trimmed: &str, keywords: &[&str]) -> bool {
    let rest = trimmed.strip_prefix("async ").map(str::trim_start).unwrap_or(trimmed);
    keywords.iter().any(|kw| {
        rest.strip_prefix(kw)
            .and_then(|r| r.strip_prefix(char::is_whitespace))
            .is_some_and(|r| r.trim_start().starts_with(|c: char| c.is_alphabetic() || c == '_'))
    })
}

/// Counts comments and declarations, ignoring anything inside string
/// literals (including triple-quoted docstrings spanning lines).
pub fn scan_source(code: &str) -> SourceFeatures {
    let mut features = SourceFeatures::default();
    let mut open_triple: Option<&'static str> = None;

    for line in code.lines() {
        let mut rest = line;
        let mut line_has_code = false;
        if let Some(delim) = open_triple {
            match rest.find(delim) {
                Some(pos) => {
                    rest = &rest[pos + delim.len()..];
                    open_triple = None;
                    line_has_code = true;
                }
                None => continue,
            }
        } else {
            let trimmed = line.trim_start();
            if trimmed.starts_with('#') {
                features.full_line_comments += 1;
                continue;
            }
            if is_declaration(trimmed, &["fn", "def"]) {
                features.function_definitions += 1;
            } else if is_declaration(trimmed, &["struct"]) {
                features.struct_definitions += 1;
            }
        }

        let bytes = rest.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if c == b'"' || c == b'\'' {
                let triple: &'static str = if c == b'"' { "\"\"\"" } else { "'''" };
                if rest[i..].starts_with(triple) {
                    match rest[i + 3..].find(triple) {
                        Some(end) => {
                            i += 3 + end + 3;
                            line_has_code = true;
                            continue;
                        }
                        None => {
                            open_triple = Some(triple);
                            break;
                        }
                    }
                }
                // single-line literal, honouring backslash escapes
                i += 1;
                while i < bytes.len() && bytes[i] != c {
                    if bytes[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
                i += 1;
                line_has_code = true;
                continue;
            }
            if c == b'#' {
                if line_has_code {
                    features.inline_comments += 1;
                }
                break;
            }
            if !c.is_ascii_whitespace() {
                line_has_code = true;
            }
            i += 1;
        }
    }
    features
}

/// Summary statistics of an instruction dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCard {
    pub code_blocks: u64,
    pub token_mean: f64,
    pub token_median: f64,
    /// Population standard deviation.
    pub token_stddev: f64,
    pub token_min: u64,
    pub token_max: u64,
    #[serde(flatten)]
    pub features: SourceFeatures,
}

impl DatasetCard {
    /// Builds the card from per-block token counts and features.
    ///
    /// Returns `None` for an empty dataset.
    pub fn from_blocks(tokens: &[u64], features: SourceFeatures) -> Option<Self> {
        if tokens.is_empty() {
            return None;
        }
        let n = tokens.len() as f64;
        let mean = tokens.iter().map(|&t| t as f64).sum::<f64>() / n;
        let var = tokens.iter().map(|&t| (t as f64 - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = tokens.to_vec();
        sorted.sort_unstable();
        let mid = sorted.len() / 2;
        let median = if sorted.len().is_multiple_of(2) {
            (sorted[mid - 1] as f64 + sorted[mid] as f64) / 2.0
        } else {
            sorted[mid] as f64
        };
        Some(Self {
            code_blocks: tokens.len() as u64,
            token_mean: mean,
            token_median: median,
            token_stddev: var.sqrt(),
            token_min: sorted[0],
            token_max: *sorted.last().expect("non-empty"),
            features,
        })
    }

    pub fn render_table(&self) -> String {
        let rows = [
            ("Code blocks", self.code_blocks.to_string()),
            ("Avg (Tokens)", format!("{:.2}", self.token_mean)),
            ("Median (Tokens)", format!("{:.2}", self.token_median)),
            ("Std. Dev. (Tokens)", format!("{:.2}", self.token_stddev)),
            ("Range (Tokens)", format!("{} to {}", self.token_min, self.token_max)),
            ("Comments (Full-line)", crate::text::Thousands(self.features.full_line_comments).to_string()),
            ("Comments (Inline)", crate::text::Thousands(self.features.inline_comments).to_string()),
            ("Definitions (Function)", crate::text::Thousands(self.features.function_definitions).to_string()),
            ("Definition (Struct)", crate::text::Thousands(self.features.struct_definitions).to_string()),
        ];
        let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let v = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{:<w$}  {:>v$}", "Feature", "Statistics");
        let _ = writeln!(out, "{}  {}", "-".repeat(w), "-".repeat(v));
        for (k, val) in rows {
            let _ = writeln!(out, "{k:<w$}  {val:>v$}");
        }
        out
    }
}
