//! Token counting and small text helpers shared by every stage.

use std::fmt;
use std::io::Write;
use std::process::{Command, Stdio};

use thiserror::Error;

/// Counts tokens in a piece of text.
///
/// Token counts drive the corpus accounting and the instruction-file gate, so
/// an implementation must be deterministic for a given input.
pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> usize;

    fn name(&self) -> String;
}

/// Splits on runs of Unicode whitespace.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }

    fn name(&self) -> String {
        "ws".to_string()
    }
}

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("empty tokenizer command")]
    EmptyCommand,
    #[error("unparseable tokenizer command `{0}`")]
    BadCommand(String),
    #[error("unknown tokenizer spec `{0}` (expected `ws` or `plugin:<cmd>`)")]
    UnknownSpec(String),
}

/// Delegates counting to an external program.
///
/// The program receives the text on stdin and must print a single
/// non-negative integer on stdout. A failing plugin counts as zero tokens and
/// is logged; the pipeline never aborts on a single document.
#[derive(Debug, Clone)]
pub struct CommandTokenizer {
    argv: Vec<String>,
}

impl CommandTokenizer {
    pub fn new(command: &str) -> Result<Self, TokenizerError> {
        let argv = shlex::split(command).ok_or_else(|| TokenizerError::BadCommand(command.into()))?;
        if argv.is_empty() {
            return Err(TokenizerError::EmptyCommand);
        }
        Ok(Self { argv })
    }

    fn run(&self, text: &str) -> std::io::Result<usize> {
        let mut child = Command::new(&self.argv[0])
            .args(&self.argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        if let Some(mut stdin) = child.stdin.take() {
            stdin.write_all(text.as_bytes())?;
        }
        let out = child.wait_with_output()?;
        let stdout = String::from_utf8_lossy(&out.stdout);
        stdout
            .trim()
            .parse::<usize>()
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

impl Tokenizer for CommandTokenizer {
    fn count(&self, text: &str) -> usize {
        match self.run(text) {
            Ok(n) => n,
            Err(err) => {
                tracing::warn!(command = %self.argv.join(" "), error = %err, "tokenizer plugin failed");
                0
            }
        }
    }

    fn name(&self) -> String {
        format!("plugin:{}", self.argv.join(" "))
    }
}

/// Parses `ws` or `plugin:<cmd>`.
pub fn tokenizer_from_spec(spec: &str) -> Result<Box<dyn Tokenizer>, TokenizerError> {
    match spec {
        "ws" | "whitespace" => Ok(Box::new(WhitespaceTokenizer)),
        other => match other.strip_prefix("plugin:") {
            Some(cmd) => Ok(Box::new(CommandTokenizer::new(cmd)?)),
            None => Err(TokenizerError::UnknownSpec(other.to_string())),
        },
    }
}

/// Trims and collapses every whitespace run to a single space.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Integer with comma thousands separators, the way the token tables print.
pub struct Thousands(pub u64);

impl fmt::Display for Thousands {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = self.0.to_string();
        let mut out = String::with_capacity(digits.len() + digits.len() / 3);
        for (i, ch) in digits.chars().enumerate() {
            if i > 0 && (digits.len() - i).is_multiple_of(3) {
                out.push(',');
            }
            out.push(ch);
        }
        f.pad(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_counts() {
        let tok = WhitespaceTokenizer;
        assert_eq!(tok.count(""), 0);
        assert_eq!(tok.count("fn main():"), 2);
        assert_eq!(tok.count("a b  c"), 3);
        assert_eq!(tok.count("  \n\t "), 0);
    }

    #[test]
    fn thousands_separators() {
        assert_eq!(Thousands(79_368_439).to_string(), "79,368,439");
        assert_eq!(Thousands(0).to_string(), "0");
        assert_eq!(Thousands(999).to_string(), "999");
        assert_eq!(Thousands(1000).to_string(), "1,000");
        assert_eq!(format!("{:>8}", Thousands(1234)), "   1,234");
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(tokenizer_from_spec("ws").unwrap().name(), "ws");
        assert!(tokenizer_from_spec("plugin:").is_err());
        assert!(tokenizer_from_spec("bpe").is_err());
    }

    #[test]
    fn plugin_tokenizer_reads_stdout() {
        let tok = CommandTokenizer::new("sh -c 'wc -c'").unwrap();
        assert_eq!(tok.count("abcd"), 4);
        let broken = CommandTokenizer::new("sh -c 'echo nope'").unwrap();
        assert_eq!(broken.count("abcd"), 0);
    }
}
