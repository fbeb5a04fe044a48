use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::Stage;
use crate::text::Thousands;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRow {
    pub stage: Stage,
    pub description: String,
    pub tokens: u64,
    pub samples: u64,
    pub dropped: u64,
    pub flagged: u64,
}

/// Token and sample counts surviving each filter, in stage order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub tokenizer: String,
    pub input_tokens: u64,
    pub input_samples: u64,
    pub rows: Vec<StageRow>,
}

impl PipelineReport {
    pub fn final_tokens(&self) -> u64 {
        self.rows.last().map_or(self.input_tokens, |r| r.tokens)
    }

    pub fn final_samples(&self) -> u64 {
        self.rows.last().map_or(self.input_samples, |r| r.samples)
    }

    pub fn is_monotone(&self) -> bool {
        let mut prev = (self.input_tokens, self.input_samples);
        for row in &self.rows {
            if row.tokens > prev.0 || row.samples > prev.1 {
                return false;
            }
            prev = (row.tokens, row.samples);
        }
        true
    }

    /// Renders the filter / description / token-count table.
    pub fn render_table(&self) -> String {
        let mut lines: Vec<[String; 4]> = vec![[
            "Filter".into(),
            "Description".into(),
            "# Tokens".into(),
            "# Samples".into(),
        ]];
        lines.push([
            "None".into(),
            "All Collected Contents".into(),
            Thousands(self.input_tokens).to_string(),
            Thousands(self.input_samples).to_string(),
        ]);
        for row in &self.rows {
            lines.push([
                row.stage.to_string(),
                row.description.clone(),
                Thousands(row.tokens).to_string(),
                Thousands(row.samples).to_string(),
            ]);
        }
        let mut widths = [0usize; 4];
        for line in &lines {
            for (w, cell) in widths.iter_mut().zip(line) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        for (i, line) in lines.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<w0$} | {:<w1$} | {:>w2$} | {:>w3$}",
                line[0],
                line[1],
                line[2],
                line[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
            if i == 0 {
                let _ = writeln!(
                    out,
                    "{}-+-{}-+-{}-+-{}",
                    "-".repeat(widths[0]),
                    "-".repeat(widths[1]),
                    "-".repeat(widths[2]),
                    "-".repeat(widths[3])
                );
            }
        }
        out
    }
}
