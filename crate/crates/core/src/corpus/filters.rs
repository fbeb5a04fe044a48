//! Per-document predicates F1 through F4.

use std::collections::HashMap;

use num_rational::Ratio;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::blocks::{paragraphs, segment_blocks};
use super::{CorpusError, FilterOutcome, OriginKind, RawDocument, Stage};

pub const APACHE_2_0: &str = "Apache-2.0";

/// Maps common spellings of a license name to an SPDX-style identifier.
/// Unknown names are returned trimmed but otherwise untouched.
pub fn normalize_license(tag: &str) -> String {
    let key: String = tag
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    let canonical = match key.as_str() {
        "apache20" | "apache2" | "apachev2" | "apachev20" | "apachelicense20" | "apachelicensev20"
        | "apachelicenseversion20" | "asl20" | "al20" => APACHE_2_0,
        "mit" | "mitlicense" | "expat" => "MIT",
        "bsd3clause" | "bsd3" | "newbsd" => "BSD-3-Clause",
        "bsd2clause" | "bsd2" | "simplifiedbsd" => "BSD-2-Clause",
        "gpl30" | "gplv3" | "gpl3" | "gpl30only" => "GPL-3.0",
        "gpl20" | "gplv2" | "gpl2" => "GPL-2.0",
        "mpl20" | "mozillapubliclicense20" => "MPL-2.0",
        "unlicense" | "theunlicense" => "Unlicense",
        _ => return tag.trim().to_string(),
    };
    canonical.to_string()
}

/// F1: keeps Apache-2.0 content.
///
/// Non-repository documents without a license tag pass unless
/// `require_license_for_web` is set.
pub fn f1_license(doc: &RawDocument, require_license_for_web: bool) -> FilterOutcome {
    match doc.license_tag.as_deref().map(str::trim).filter(|t| !t.is_empty()) {
        Some(tag) if normalize_license(tag) == APACHE_2_0 => FilterOutcome::kept(Stage::F1),
        Some(_) => FilterOutcome::dropped(Stage::F1, "non-Apache-2.0"),
        None if doc.origin_kind == OriginKind::Repository => {
            FilterOutcome::dropped(Stage::F1, "missing license")
        }
        None if require_license_for_web => FilterOutcome::dropped(Stage::F1, "missing license"),
        None => FilterOutcome::kept(Stage::F1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternScope {
    /// Matched against the whole body.
    Anywhere,
    /// Matched only against lines outside Mojo fences; skipped entirely for
    /// `.mojo`/`.🔥` source documents.
    OutsideMojo,
}

#[derive(Debug, Clone)]
pub struct PythonPattern {
    pub name: String,
    pub regex: Regex,
    pub scope: PatternScope,
}

/// The F2 pattern set. Compiled once at configuration time, so an invalid
/// user pattern fails before any document is processed.
#[derive(Debug, Clone)]
pub struct PythonPatterns {
    patterns: Vec<PythonPattern>,
}

const PY_FENCE: &str = r"(?m)^[ \t]*(?:```|~~~)[ \t]*(?:python3?|py|ipython|pycon)\b";
const PY_SHEBANG: &str = r"(?m)^#!.*\bpython[0-9.]*\b";
const PY_IMPORT: &str = r"(?m)^import[ \t]+[A-Za-z_][\w.]*";
const BARE_DEF: &str = r"(?m)^[ \t]*def[ \t]+\w+[ \t]*\(";

impl Default for PythonPatterns {
    fn default() -> Self {
        Self::from_specs([
            ("python-fence", PY_FENCE, PatternScope::Anywhere),
            ("python-shebang", PY_SHEBANG, PatternScope::Anywhere),
            ("python-import", PY_IMPORT, PatternScope::OutsideMojo),
        ])
        .expect("built-in patterns compile")
    }
}

impl PythonPatterns {
    pub fn from_specs<'a>(
        specs: impl IntoIterator<Item = (&'a str, &'a str, PatternScope)>,
    ) -> Result<Self, CorpusError> {
        let mut patterns = Vec::new();
        for (name, pattern, scope) in specs {
            let regex = Regex::new(pattern).map_err(|e| CorpusError::InvalidPattern {
                pattern: pattern.to_string(),
                source: Box::new(e),
            })?;
            patterns.push(PythonPattern { name: name.to_string(), regex, scope });
        }
        Ok(Self { patterns })
    }

    /// Adds the literal `def name(` cue. Off by default since Mojo uses `def`.
    pub fn with_bare_def(mut self) -> Self {
        self.patterns.push(PythonPattern {
            name: "bare-def".into(),
            regex: Regex::new(BARE_DEF).expect("built-in pattern compiles"),
            scope: PatternScope::Anywhere,
        });
        self
    }

    pub fn push(&mut self, name: &str, pattern: &str, scope: PatternScope) -> Result<(), CorpusError> {
        let extra = Self::from_specs([(name, pattern, scope)])?;
        self.patterns.extend(extra.patterns);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.patterns.iter().map(|p| p.name.as_str()).collect()
    }
}

/// Blanks out lines inside ```` ```mojo ```` fences so scoped patterns only
/// see the surrounding material.
fn outside_mojo_fences(body: &str) -> String {
    let mut out = String::with_capacity(body.len());
    let mut in_mojo = false;
    let mut in_other = false;
    for line in body.lines() {
        let t = line.trim_start();
        let is_fence = t.starts_with("```") || t.starts_with("~~~");
        if is_fence && !in_mojo && !in_other {
            let tag = t.trim_start_matches(['`', '~']).trim().to_ascii_lowercase();
            if tag.starts_with("mojo") || tag.starts_with('🔥') {
                in_mojo = true;
                out.push('\n');
                continue;
            }
            in_other = true;
        } else if is_fence {
            let was_mojo = in_mojo;
            in_mojo = false;
            in_other = false;
            if was_mojo {
                out.push('\n');
                continue;
            }
        } else if in_mojo {
            out.push('\n');
            continue;
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// F2: drops documents matching any Python cue; the reason names the first
/// matching pattern in set order.
pub fn f2_python_exclusion(doc: &RawDocument, patterns: &PythonPatterns) -> FilterOutcome {
    let mut masked: Option<String> = None;
    for pattern in &patterns.patterns {
        let hit = match pattern.scope {
            PatternScope::Anywhere => pattern.regex.is_match(&doc.body),
            PatternScope::OutsideMojo => {
                if doc.is_mojo_source() {
                    false
                } else {
                    let text = masked.get_or_insert_with(|| outside_mojo_fences(&doc.body));
                    pattern.regex.is_match(text)
                }
            }
        };
        if hit {
            return FilterOutcome::dropped(Stage::F2, format!("python pattern `{}`", pattern.name));
        }
    }
    FilterOutcome::kept(Stage::F2)
}

pub const MIN_BLOCKS: usize = 3;
pub const MIN_BLOCK_CHARS: usize = 3;

/// F3: at least three blocks carrying three or more non-whitespace
/// characters each.
pub fn f3_structure(doc: &RawDocument) -> FilterOutcome {
    let blocks = segment_blocks(&doc.body);
    let meaningful = blocks
        .iter()
        .filter(|b| b.non_whitespace_chars() >= MIN_BLOCK_CHARS)
        .count();
    if meaningful >= MIN_BLOCKS {
        FilterOutcome::kept(Stage::F3)
    } else {
        FilterOutcome::dropped(
            Stage::F3,
            format!(
                "{meaningful} of {} blocks have >= {MIN_BLOCK_CHARS} characters; need {MIN_BLOCKS}",
                blocks.len()
            ),
        )
    }
}

/// Upper bounds for F4. A document is dropped only when a fraction is
/// strictly greater than its bound; comparisons are exact rationals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepetitionThresholds {
    pub duplicate_paragraphs: Ratio<u64>,
    pub duplicate_chars: Ratio<u64>,
}

impl RepetitionThresholds {
    pub const PARAGRAPH_FORMULA: &'static str =
        "dup_paragraph_fraction = 1 - distinct_paragraphs / total_paragraphs";
    pub const CHAR_FORMULA: &'static str =
        "dup_char_fraction = chars(every paragraph occurrence after its first) / chars(all paragraphs)";
}

impl Default for RepetitionThresholds {
    fn default() -> Self {
        Self { duplicate_paragraphs: Ratio::new(3, 10), duplicate_chars: Ratio::new(1, 5) }
    }
}

/// Exact duplicate fractions of a body, or `None` when it has no paragraphs.
pub(crate) fn repetition_fractions(body: &str) -> Option<(Ratio<u64>, Ratio<u64>)> {
    let paras = paragraphs(body);
    if paras.is_empty() {
        return None;
    }
    let mut seen: HashMap<&str, ()> = HashMap::with_capacity(paras.len());
    let mut total_chars = 0u64;
    let mut repeat_chars = 0u64;
    for p in &paras {
        let chars = p.chars().count() as u64;
        total_chars += chars;
        if seen.insert(p.as_str(), ()).is_some() {
            repeat_chars += chars;
        }
    }
    let total = paras.len() as u64;
    let distinct = seen.len() as u64;
    Some((Ratio::new(total - distinct, total), Ratio::new(repeat_chars, total_chars.max(1))))
}

fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// F4: drops documents with excessive internal repetition.
pub fn f4_repetition(doc: &RawDocument, thresholds: &RepetitionThresholds) -> FilterOutcome {
    let Some((dup_paragraphs, dup_chars)) = repetition_fractions(&doc.body) else {
        return FilterOutcome::kept(Stage::F4).flagged("no paragraphs; kept vacuously");
    };
    if dup_paragraphs > thresholds.duplicate_paragraphs {
        return FilterOutcome::dropped(
            Stage::F4,
            format!("duplicate paragraph fraction {:.4}", ratio_f64(dup_paragraphs)),
        );
    }
    if dup_chars > thresholds.duplicate_chars {
        return FilterOutcome::dropped(
            Stage::F4,
            format!("duplicate character fraction {:.4}", ratio_f64(dup_chars)),
        );
    }
    FilterOutcome::kept(Stage::F4)
}
