use std::collections::BTreeSet;

use plforge::sft::{rank_repos, token_gate, token_gate_count, CodeFile, RepoMeta};
use plforge::text::WhitespaceTokenizer;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use crate::{ensure, Outcome};

const RANK_CASES: u32 = 1000;

pub fn token_gate_table() -> Outcome {
    let tau = |n: u64| (5..=500).contains(&n);
    for (n, want) in [(4, false), (5, true), (500, true), (501, false)] {
        ensure!(tau(n) == want, "oracle disagrees with the table at {n}");
        ensure!(token_gate_count(n) == want, "token_gate_count({n}) = {}", !want);
        let content = vec!["tok"; n as usize].join(" ");
        let file = CodeFile::new("repo", "src/f.mojo", content, &WhitespaceTokenizer).map_err(|e| e.to_string())?;
        ensure!(file.token_count == n, "file counted {} tokens, wanted {n}", file.token_count);
        ensure!(token_gate(&file) == want, "token_gate on a {n}-token file = {}", !want);
    }
    Ok("4 -> out, 5 -> in, 500 -> in, 501 -> out".into())
}

/// Repeatedly takes the best remaining repository: most stars, then the
/// smallest name.
fn selection_oracle(repos: &[RepoMeta], n: usize) -> Vec<RepoMeta> {
    let mut left: Vec<RepoMeta> = repos.to_vec();
    let mut out = Vec::new();
    while out.len() < n && !left.is_empty() {
        let mut best = 0;
        for (i, r) in left.iter().enumerate() {
            let b = &left[best];
            if r.stars > b.stars || (r.stars == b.stars && r.name < b.name) {
                best = i;
            }
        }
        out.push(left.remove(best));
    }
    out
}

pub fn rank_repos_oracle() -> Outcome {
    let strategy = (prop::collection::vec((0u64..6, 0u16..500), 0..40), 1usize..45);
    let mut runner = TestRunner::new(Config { cases: RANK_CASES, failure_persistence: None, ..Config::default() });
    runner
        .run(&strategy, |(raw, n)| {
            let mut names = BTreeSet::new();
            let repos: Vec<RepoMeta> = raw
                .into_iter()
                .filter(|(_, name)| names.insert(*name))
                .map(|(stars, name)| RepoMeta {
                    name: format!("repo-{name}"),
                    stars,
                    license_tag: "Apache-2.0".into(),
                    path: None,
                })
                .collect();
            let ranked = rank_repos(&repos, n).unwrap();
            prop_assert_eq!(&ranked, &selection_oracle(&repos, n));
            prop_assert_eq!(ranked.len(), n.min(repos.len()));
            if let Some(min_in) = ranked.iter().map(|r| r.stars).min() {
                let excluded = repos.iter().filter(|r| !ranked.contains(r));
                prop_assert!(excluded.map(|r| r.stars).all(|s| s <= min_in));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let tie = |name: &str, stars| RepoMeta { name: name.into(), stars, license_tag: "MIT".into(), path: None };
    let top = rank_repos(&[tie("zeta", 4), tie("alpha", 4), tie("mid", 1)], 1).map_err(|e| e.to_string())?;
    ensure!(top[0].name == "alpha", "tie at the cut picked {}", top[0].name);
    Ok(format!("{RANK_CASES} random star vectors with ties"))
}
