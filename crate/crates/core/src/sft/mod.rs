//! Instruction-dataset construction: repository ranking, the code-file token
//! gate, the expert triage queue, prompt paraphrasing and final assembly with
//! its dataset card.

mod card;
mod dataset;
mod paraphrase;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use walkdir::WalkDir;

pub use card::{scan_source, DatasetCard, SourceFeatures};
pub use dataset::{
    assemble_sft, pairs_for_snippet, read_pairs, write_pairs, InstructionPair, SftDataset, VARIANTS_PER_SNIPPET,
};
pub use paraphrase::{
    generate_all, generate_paraphrases, ParaphraseError, ParaphraseProvider, ParaphraseRequest, ParaphraseResponse,
    ParaphraseSet, DEFAULT_SYSTEM_HINT,
};

pub use crate::review::{ReviewAction, ReviewTask, TaskKind, TaskStatus};
use crate::review::triage_task_id;
use crate::text::Tokenizer;

#[derive(Debug, Error, PartialEq)]
pub enum SftError {
    #[error("repository count must be at least 1")]
    InvalidTop,
    #[error("duplicate file `{0}` in triage queue")]
    DuplicateFile(String),
    #[error("nothing to assemble")]
    NothingToAssemble,
    #[error("snippets without exactly 4 prompt variants: {}", .0.join(", "))]
    VariantCount(Vec<String>),
    #[error("unsupported code file extension for `{0}`")]
    Extension(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoMeta {
    pub name: String,
    pub stars: u64,
    pub license_tag: String,
    /// Local checkout to extract code files from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

/// Reads a line-delimited repository manifest of [`RepoMeta`] records.
pub fn read_repos(path: &Path) -> std::io::Result<Vec<RepoMeta>> {
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

/// The `n` most-starred repositories, ties broken by ascending name.
///
/// Every returned star count is at least every excluded one.
pub fn rank_repos(repos: &[RepoMeta], n: usize) -> Result<Vec<RepoMeta>, SftError> {
    if n == 0 {
        return Err(SftError::InvalidTop);
    }
    let mut sorted = repos.to_vec();
    sorted.sort_by(|a, b| b.stars.cmp(&a.stars).then_with(|| a.name.cmp(&b.name)));
    sorted.truncate(n);
    Ok(sorted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeExtension {
    Mojo,
    FireEmoji,
}

impl CodeExtension {
    pub fn from_path(path: &str) -> Option<Self> {
        if path.ends_with(".mojo") {
            Some(Self::Mojo)
        } else if path.ends_with(".🔥") {
            Some(Self::FireEmoji)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeFile {
    pub repo: String,
    pub path: String,
    pub extension: CodeExtension,
    pub content: String,
    pub token_count: u64,
}

impl CodeFile {
    pub fn new(repo: &str, path: &str, content: String, tokenizer: &dyn Tokenizer) -> Result<Self, SftError> {
        let extension = CodeExtension::from_path(path).ok_or_else(|| SftError::Extension(path.to_string()))?;
        Ok(Self {
            repo: repo.to_string(),
            path: path.to_string(),
            extension,
            token_count: tokenizer.count(&content) as u64,
            content,
        })
    }

    /// `repo/path`, the snippet id used throughout the dataset.
    pub fn id(&self) -> String {
        format!("{}/{}", self.repo, self.path)
    }
}

pub const MIN_FILE_TOKENS: u64 = 5;
pub const MAX_FILE_TOKENS: u64 = 500;

/// Indicator of the closed interval [5, 500].
pub fn token_gate_count(token_count: u64) -> bool {
    (MIN_FILE_TOKENS..=MAX_FILE_TOKENS).contains(&token_count)
}

pub fn token_gate(file: &CodeFile) -> bool {
    token_gate_count(file.token_count)
}

/// Collects `.mojo` and `.🔥` files under a repository checkout, in path order.
pub fn extract_code_files(repo: &str, root: &Path, tokenizer: &dyn Tokenizer) -> Vec<CodeFile> {
    let mut files = Vec::new();
    for entry in WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'))
        .flatten()
    {
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(root).unwrap_or(entry.path()).to_string_lossy().into_owned();
        if CodeExtension::from_path(&rel).is_none() {
            continue;
        }
        match std::fs::read_to_string(entry.path()) {
            Ok(content) => {
                if let Ok(file) = CodeFile::new(repo, &rel, content, tokenizer) {
                    files.push(file);
                }
            }
            Err(err) => tracing::warn!(path = %entry.path().display(), error = %err, "skipping unreadable code file"),
        }
    }
    files
}

/// One pending triage task per file, carrying the source and provenance.
pub fn enqueue_triage(files: &[CodeFile]) -> Result<Vec<ReviewTask>, SftError> {
    let mut seen = HashSet::with_capacity(files.len());
    let mut tasks = Vec::with_capacity(files.len());
    for file in files {
        let id = file.id();
        if !seen.insert(id.clone()) {
            return Err(SftError::DuplicateFile(id));
        }
        tasks.push(ReviewTask::pending(
            triage_task_id(&id),
            TaskKind::SampleTriage,
            json!({
                "snippet_id": id,
                "repo": file.repo,
                "path": file.path,
                "token_count": file.token_count,
                "source": file.content,
            }),
        ));
    }
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::WhitespaceTokenizer;

    fn repo(name: &str, stars: u64) -> RepoMeta {
        RepoMeta { name: name.into(), stars, license_tag: "Apache-2.0".into(), path: None }
    }

    fn file(path: &str, tokens: u64) -> CodeFile {
        CodeFile {
            repo: "r".into(),
            path: path.into(),
            extension: CodeExtension::Mojo,
            content: String::new(),
            token_count: tokens,
        }
    }

    #[test]
    fn rank_top_two() {
        let out = rank_repos(&[repo("a", 5), repo("b", 3), repo("c", 9)], 2).unwrap();
        let names: Vec<_> = out.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["c", "a"]);
    }

    #[test]
    fn rank_tie_breaks_by_name() {
        let out = rank_repos(&[repo("zeta", 4), repo("alpha", 4), repo("b", 1)], 1).unwrap();
        assert_eq!(out[0].name, "alpha");
        assert_eq!(rank_repos(&[repo("a", 1)], 0), Err(SftError::InvalidTop));
        assert_eq!(rank_repos(&[repo("a", 1)], 10).unwrap().len(), 1);
    }

    #[test]
    fn gate_truth_table() {
        for (count, expected) in [(0, false), (4, false), (5, true), (500, true), (501, false)] {
            assert_eq!(token_gate(&file("a.mojo", count)), expected, "count {count}");
        }
    }

    #[test]
    fn triage_queue() {
        let files: Vec<_> = (0..968).map(|i| file(&format!("f{i}.mojo"), 10)).collect();
        let tasks = enqueue_triage(&files).unwrap();
        assert_eq!(tasks.len(), 968);
        assert!(tasks.iter().all(|t| t.status == TaskStatus::Pending && t.kind == TaskKind::SampleTriage));
        assert!(enqueue_triage(&[]).unwrap().is_empty());
        let dup = [file("x.mojo", 10), file("x.mojo", 11)];
        assert_eq!(enqueue_triage(&dup), Err(SftError::DuplicateFile("r/x.mojo".into())));
    }

    #[test]
    fn extension_and_extraction() {
        assert_eq!(CodeExtension::from_path("a/b.🔥"), Some(CodeExtension::FireEmoji));
        assert_eq!(CodeExtension::from_path("a/b.py"), None);
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("src")).unwrap();
        std::fs::write(dir.path().join("src/a.mojo"), "fn a(): pass").unwrap();
        std::fs::write(dir.path().join("src/b.🔥"), "fn b(): pass").unwrap();
        std::fs::write(dir.path().join("README.md"), "# x").unwrap();
        let files = extract_code_files("demo", dir.path(), &WhitespaceTokenizer);
        assert_eq!(files.len(), 2);
        assert_eq!(files[0].id(), "demo/src/a.mojo");
        assert_eq!(files[0].token_count, 3);
    }
}
