use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Code,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub content: String,
}

impl Block {
    pub fn non_whitespace_chars(&self) -> usize {
        self.content.chars().filter(|c| !c.is_whitespace()).count()
    }
}

const CODE_KEYWORDS: [&str; 5] = ["fn", "var", "let", "from", "import"];

fn is_fence(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("```") || t.starts_with("~~~")
}

fn looks_like_code_line(line: &str) -> bool {
    if line.starts_with(' ') || line.starts_with('\t') {
        return true;
    }
    CODE_KEYWORDS.iter().any(|kw| {
        line.strip_prefix(kw)
            .is_some_and(|rest| rest.is_empty() || rest.starts_with(char::is_whitespace))
    })
}

fn classify(lines: &[&str]) -> BlockKind {
    let code = lines.iter().filter(|l| looks_like_code_line(l)).count();
    if code * 2 >= lines.len() {
        BlockKind::Code
    } else {
        BlockKind::Text
    }
}

/// Splits a body into blank-line-delimited blocks.
///
/// A fenced region (from an opening ```` ``` ```` line through its closing
/// fence, blank lines included) is always one code block. Other segments are
/// code when at least half their lines are indented or start with a Mojo
/// declaration keyword, text otherwise.
pub fn segment_blocks(body: &str) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let mut fenced: Option<Vec<&str>> = None;

    let flush = |current: &mut Vec<&str>, blocks: &mut Vec<Block>| {
        if !current.is_empty() {
            blocks.push(Block { kind: classify(current), content: current.join("\n") });
            current.clear();
        }
    };

    for line in body.lines() {
        if let Some(fence) = fenced.as_mut() {
            fence.push(line);
            if is_fence(line) {
                blocks.push(Block { kind: BlockKind::Code, content: fence.join("\n") });
                fenced = None;
            }
            continue;
        }
        if is_fence(line) {
            flush(&mut current, &mut blocks);
            fenced = Some(vec![line]);
        } else if line.trim().is_empty() {
            flush(&mut current, &mut blocks);
        } else {
            current.push(line);
        }
    }
    if let Some(fence) = fenced {
        blocks.push(Block { kind: BlockKind::Code, content: fence.join("\n") });
    }
    flush(&mut current, &mut blocks);
    blocks
}

/// Maximal runs of non-blank lines, each joined with `\n`.
pub fn paragraphs(body: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in body.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        out.push(current.join("\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_lines_delimit_blocks() {
        let body = "Intro text here.\n\nfn main():\n    print(1)\n\nClosing words.";
        let blocks = segment_blocks(body);
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[0].kind, BlockKind::Text);
        assert_eq!(blocks[1].kind, BlockKind::Code);
        assert_eq!(blocks[2].kind, BlockKind::Text);
        let rejoined = blocks.iter().map(|b| b.content.as_str()).collect::<Vec<_>>().join("\n\n");
        assert_eq!(rejoined, body);
    }

    #[test]
    fn fence_keeps_inner_blank_lines() {
        let body = "Text.\n\n```mojo\nfn a():\n\n    pass\n```\nAfter.";
        let blocks = segment_blocks(body);
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[1].kind, BlockKind::Code);
        assert!(blocks[1].content.contains("\n\n"));
        assert_eq!(blocks[2].content, "After.");
    }

    #[test]
    fn unclosed_fence_runs_to_end() {
        let blocks = segment_blocks("```\ncode\n\nmore");
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].kind, BlockKind::Code);
    }

    #[test]
    fn half_code_lines_is_code() {
        let blocks = segment_blocks("var x = 1\nsome prose");
        assert_eq!(blocks[0].kind, BlockKind::Code);
        let blocks = segment_blocks("variable prose\nsome prose");
        assert_eq!(blocks[0].kind, BlockKind::Text);
    }

    #[test]
    fn paragraphs_split_on_blank_runs() {
        assert_eq!(paragraphs("a\nb\n\n\n c \n  \nd"), vec!["a\nb", " c ", "d"]);
        assert!(paragraphs("\n  \n").is_empty());
    }
}
