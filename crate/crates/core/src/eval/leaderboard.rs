use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::harness::EvalReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub model: String,
    pub kind: String,
    pub parameters: String,
    pub pass_at_1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub rows: Vec<LeaderboardRow>,
}

/// Orders models by ascending pass@1, ties by model name. Reports without a
/// pass@1 value go last.
pub fn render_leaderboard(reports: &[EvalReport]) -> Leaderboard {
    let mut rows: Vec<LeaderboardRow> = reports
        .iter()
        .map(|r| LeaderboardRow {
            model: r.model.id.clone(),
            kind: r.model.kind.clone().unwrap_or_else(|| "--".into()),
            parameters: r.model.parameters.clone().unwrap_or_else(|| "--".into()),
            pass_at_1: r.pass_at_1(),
        })
        .collect();
    rows.sort_by(|a, b| match (a.pass_at_1, b.pass_at_1) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.model.cmp(&b.model)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.model.cmp(&b.model),
    });
    Leaderboard { rows }
}

impl Leaderboard {
    pub fn render_table(&self) -> String {
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.model.clone(),
                    r.kind.clone(),
                    r.parameters.clone(),
                    r.pass_at_1.map(|p| format!("{:.1}", p * 100.0)).unwrap_or_else(|| "n/a".into()),
                ]
            })
            .collect();
        let header = ["Model", "Type", "Parameters", "Pass@1"];
        let mut widths = header.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cols: [&str; 4]| {
            let _ = writeln!(
                out,
                "{:<w0$}  {:<w1$}  {:>w2$}  {:>w3$}",
                cols[0],
                cols[1],
                cols[2],
                cols[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
        };
        line(&mut out, header);
        let rule = widths.map(|w| "-".repeat(w));
        line(&mut out, [&rule[0], &rule[1], &rule[2], &rule[3]]);
        for row in &cells {
            line(&mut out, [&row[0], &row[1], &row[2], &row[3]]);
        }
        out
    }
}
