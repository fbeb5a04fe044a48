//! Source-manifest ingestion.
//!
//! Each manifest line names a local file, a local repository checkout, or a
//! URL. Unreadable sources become skip records; ingestion itself never fails
//! on a single bad entry.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::filters::normalize_license;
use super::{CorpusError, OriginKind, RawDocument};
use crate::text::Tokenizer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(rename = "ref")]
    pub source_ref: String,
    pub origin_kind: OriginKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub license_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub source_ref: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct IngestResult {
    pub documents: Vec<RawDocument>,
    pub skips: Vec<SkipRecord>,
}

/// Retrieves remote sources. Returns the raw response body.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<String, String>;
}

/// Refuses every URL; used when ingestion is restricted to local files.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoFetcher;

impl Fetcher for NoFetcher {
    fn fetch(&self, url: &str) -> Result<String, String> {
        Err(format!("no fetcher configured for {url}"))
    }
}

/// Reads a manifest. Relative local references are resolved against the
/// manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut entry: ManifestEntry = serde_json::from_str(line)
            .map_err(|e| CorpusError::Manifest { line: idx + 1, message: e.to_string() })?;
        let is_url = entry.source_ref.starts_with("http://") || entry.source_ref.starts_with("https://");
        if !is_url && Path::new(&entry.source_ref).is_relative() {
            entry.source_ref = base.join(&entry.source_ref).to_string_lossy().into_owned();
        }
        entries.push(entry);
    }
    Ok(entries)
}

const DOC_EXTENSIONS: [&str; 7] = ["mojo", "🔥", "md", "markdown", "txt", "rst", "html"];

/// Identifies a license from the text of a license file.
pub fn detect_license(text: &str) -> Option<String> {
    let lower = text.to_lowercase();
    let tag = if lower.contains("apache license") && lower.contains("2.0") {
        "Apache-2.0"
    } else if lower.contains("mit license") || lower.contains("permission is hereby granted, free of charge") {
        "MIT"
    } else if lower.contains("gnu general public license") && lower.contains("version 3") {
        "GPL-3.0"
    } else if lower.contains("gnu general public license") && lower.contains("version 2") {
        "GPL-2.0"
    } else if lower.contains("mozilla public license") {
        "MPL-2.0"
    } else if lower.contains("redistributions of source code") {
        if lower.contains("neither the name") {
            "BSD-3-Clause"
        } else {
            "BSD-2-Clause"
        }
    } else {
        let first = text.lines().map(str::trim).find(|l| !l.is_empty())?;
        return Some(normalize_license(first));
    };
    Some(tag.to_string())
}

fn is_license_file(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .map(|n| {
            let upper = n.to_ascii_uppercase();
            upper.starts_with("LICENSE") || upper.starts_with("LICENCE") || upper.starts_with("COPYING")
        })
        .unwrap_or(false)
}

fn license_in_dir(dir: &Path) -> Option<String> {
    let mut entries: Vec<_> = std::fs::read_dir(dir).ok()?.flatten().map(|e| e.path()).collect();
    entries.sort();
    entries
        .iter()
        .filter(|p| p.is_file() && is_license_file(p))
        .find_map(|p| std::fs::read_to_string(p).ok().and_then(|t| detect_license(&t)))
}

fn has_doc_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| DOC_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

fn html_patterns() -> &'static [(Regex, &'static str); 4] {
    static PATTERNS: OnceLock<[(Regex, &'static str); 4]> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        [
            (Regex::new(r"(?is)<(script|style|noscript)\b.*?</(script|style|noscript)>").unwrap(), ""),
            (Regex::new(r"(?i)<br\s*/?>").unwrap(), "\n"),
            (Regex::new(r"(?i)</(p|div|h[1-6]|li|pre|section|article|tr)>").unwrap(), "\n\n"),
            (Regex::new(r"(?s)<[^>]*>").unwrap(), ""),
        ]
    })
}

/// Crude HTML-to-text conversion for fetched pages.
pub fn extract_text(html: &str) -> String {
    let mut text = html.to_string();
    for (re, rep) in html_patterns() {
        text = re.replace_all(&text, *rep).into_owned();
    }
    let text = text
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&nbsp;", " ")
        .replace("&amp;", "&");
    let mut out = Vec::new();
    let mut blank = 0;
    for line in text.lines() {
        let line = line.trim_end();
        if line.trim().is_empty() {
            blank += 1;
            if blank == 1 && !out.is_empty() {
                out.push(String::new());
            }
        } else {
            blank = 0;
            out.push(line.to_string());
        }
    }
    out.join("\n").trim().to_string()
}

fn unique_id(base: String, used: &mut HashSet<String>) -> String {
    if used.insert(base.clone()) {
        return base;
    }
    let mut n = 2;
    loop {
        let candidate = format!("{base}#{n}");
        if used.insert(candidate.clone()) {
            return candidate;
        }
        n += 1;
    }
}

/// Resolves each manifest entry into documents.
pub fn ingest_sources(
    manifest: &[ManifestEntry],
    fetcher: &dyn Fetcher,
    tokenizer: &dyn Tokenizer,
) -> IngestResult {
    let mut result = IngestResult::default();
    let mut used = HashSet::new();
    for entry in manifest {
        let hint = entry.license_hint.as_deref().map(normalize_license);
        let mut push = |result: &mut IngestResult, id: String, source_ref: String, license: Option<String>, body: String| {
            if body.trim().is_empty() {
                result.skips.push(SkipRecord { source_ref: id, reason: "empty body".into() });
                return;
            }
            let id = unique_id(id, &mut used);
            result.documents.push(RawDocument::new(id, source_ref, entry.origin_kind, license, body, tokenizer));
        };

        let reference = entry.source_ref.as_str();
        if reference.starts_with("http://") || reference.starts_with("https://") {
            match fetcher.fetch(reference) {
                Ok(raw) => {
                    let body = if raw.to_ascii_lowercase().contains("<html") { extract_text(&raw) } else { raw };
                    push(&mut result, reference.to_string(), reference.to_string(), hint.clone(), body);
                }
                Err(reason) => result.skips.push(SkipRecord { source_ref: reference.into(), reason }),
            }
            continue;
        }

        let path = Path::new(reference);
        if path.is_dir() {
            let license = license_in_dir(path).or(hint.clone());
            let mut files: Vec<_> = WalkDir::new(path)
                .sort_by_file_name()
                .into_iter()
                .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'))
                .flatten()
                .filter(|e| e.file_type().is_file() && has_doc_extension(e.path()) && !is_license_file(e.path()))
                .map(|e| e.into_path())
                .collect();
            files.sort();
            if files.is_empty() {
                result.skips.push(SkipRecord { source_ref: reference.into(), reason: "no ingestible files".into() });
            }
            for file in files {
                let rel = file.strip_prefix(path).unwrap_or(&file).to_string_lossy().into_owned();
                let id = format!("{reference}::{rel}");
                match std::fs::read_to_string(&file) {
                    Ok(body) => {
                        let source_ref = file.to_string_lossy().into_owned();
                        push(&mut result, id, source_ref, license.clone(), body);
                    }
                    Err(e) => result.skips.push(SkipRecord { source_ref: id, reason: format!("unreadable: {e}") }),
                }
            }
            continue;
        }

        match std::fs::read_to_string(path) {
            Ok(body) => {
                let license = if entry.origin_kind == OriginKind::Repository {
                    path.parent().and_then(license_in_dir).or(hint.clone())
                } else {
                    hint.clone()
                };
                push(&mut result, reference.to_string(), reference.to_string(), license, body);
            }
            Err(e) => result.skips.push(SkipRecord {
                source_ref: reference.into(),
                reason: format!("unreadable path: {e}"),
            }),
        }
    }
    result
}
