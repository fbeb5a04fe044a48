use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use plforge::client::RetryPolicy;
use plforge::sft::{pairs_for_snippet, InstructionPair};
use plforge::translate::stub::{StubMt, StubQe};
use plforge::translate::{
    bert_score, build_msft, write_audit, EmbeddingSet, HashEmbedding, MtClient, QeClient, QeRequest, TargetLanguage,
    TranslateConfig,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use crate::{ensure, Outcome};

const TOL: f64 = 1e-9;
const BERT_CASES: u32 = 1000;
const SELECTION_BUDGET: Duration = Duration::from_secs(10);

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

/// Greedy matching written out directly: (precision, recall, f1).
fn oracle(cand: &[Vec<f64>], refs: &[Vec<f64>]) -> (f64, f64, f64) {
    let c: Vec<Vec<f64>> = cand.iter().map(|v| unit(v)).collect();
    let r: Vec<Vec<f64>> = refs.iter().map(|v| unit(v)).collect();
    let cos = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut p = 0.0;
    for x in &c {
        p += r.iter().map(|y| cos(x, y)).fold(f64::MIN, f64::max);
    }
    p /= c.len() as f64;
    let mut rec = 0.0;
    for y in &r {
        rec += c.iter().map(|x| cos(x, y)).fold(f64::MIN, f64::max);
    }
    rec /= r.len() as f64;
    let f1 = if p + rec == 0.0 { 0.0 } else { 2.0 * p * rec / (p + rec) };
    (p, rec, f1)
}

fn set(v: &[Vec<f64>]) -> EmbeddingSet {
    EmbeddingSet::new(v.to_vec()).expect("valid embedding set")
}

fn embeddings(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), 1..7).prop_map(|mut vs| {
        for v in &mut vs {
            if v.iter().map(|x| x * x).sum::<f64>() < 1e-6 {
                v[0] = 1.0;
            }
        }
        vs
    })
}

pub fn bertscore_properties() -> Outcome {
    let hand = bert_score(&set(&[vec![1.0, 0.0], vec![0.0, 1.0]]), &set(&[vec![1.0, 0.0]])).map_err(|e| e.to_string())?;
    ensure!(
        (hand.precision - 0.5).abs() < TOL && (hand.recall - 1.0).abs() < TOL && (hand.f1 - 2.0 / 3.0).abs() < TOL,
        "hand example gave {hand:?}"
    );

    let strategy = (1usize..9).prop_flat_map(|dim| (embeddings(dim), embeddings(dim)));
    let mut runner = TestRunner::new(Config { cases: BERT_CASES, failure_persistence: None, ..Config::default() });
    runner
        .run(&strategy, |(a, b)| {
            let ab = bert_score(&set(&a), &set(&b)).unwrap();
            let ba = bert_score(&set(&b), &set(&a)).unwrap();
            let (p, r, f1) = oracle(&a, &b);
            prop_assert!((ab.precision - p).abs() < TOL && (ab.recall - r).abs() < TOL && (ab.f1 - f1).abs() < TOL);
            prop_assert!((ab.precision - ba.recall).abs() < TOL);
            prop_assert!((ab.recall - ba.precision).abs() < TOL);
            prop_assert!((ab.f1 - ba.f1).abs() < TOL);
            let aa = bert_score(&set(&a), &set(&a)).unwrap();
            prop_assert!((aa.precision - 1.0).abs() < TOL && (aa.recall - 1.0).abs() < TOL && (aa.f1 - 1.0).abs() < TOL);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("P=0.5 R=1 F1=2/3 by hand; {BERT_CASES} random pairs within {TOL:e}"))
}

const SUBJECTS: [&str; 5] = ["two lists", "a matrix", "a string", "the tensor", "a dictionary"];
const VERBS: [&str; 4] = ["Write a function that sorts", "Implement code to reverse", "Create a routine that prints", "Show how to copy"];

fn prompts() -> Vec<InstructionPair> {
    SUBJECTS
        .iter()
        .enumerate()
        .flat_map(|(s, subject)| {
            let variants: Vec<String> = VERBS.iter().map(|v| format!("{v} {subject} in Mojo.")).collect();
            pairs_for_snippet(&format!("repo/s{s}.mojo"), &format!("fn f{s}(): pass"), &variants)
        })
        .collect()
}

fn hash_tokens(text: &str) -> Vec<Vec<f64>> {
    let h = HashEmbedding::default();
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .map(|t| h.token_vector(&t))
        .collect()
}

pub fn selection_end_to_end() -> Outcome {
    let pairs = prompts();
    let languages = [TargetLanguage::Es, TargetLanguage::De, TargetLanguage::Fr, TargetLanguage::Bn];
    let systems: Vec<Arc<dyn MtClient>> = vec![
        Arc::new(StubMt::new("a")),
        Arc::new(StubMt::new("b")),
        Arc::new(StubMt::supporting("c", &[TargetLanguage::Es, TargetLanguage::De])),
    ];
    let qe = StubQe;
    let embedder = HashEmbedding::default();
    let run = |workers| {
        let config = TranslateConfig { retry: RetryPolicy::immediate(), workers, ..TranslateConfig::default() };
        build_msft(&pairs, &languages, &systems, Some(&qe as &dyn QeClient), &embedder, &config)
    };

    let started = Instant::now();
    let out = run(1)?;
    let elapsed = started.elapsed();
    ensure!(pairs.len() == 20, "{} prompts", pairs.len());
    ensure!(out.audit.len() == 80 && out.records.len() == 80 && out.gaps.is_empty(), "{} pools, {} gaps", out.audit.len(), out.gaps.len());

    let sources: HashMap<String, &str> =
        pairs.iter().map(|p| (format!("{}#{}", p.snippet_id, p.variant_index), p.prompt.as_str())).collect();
    let mut f1_only = 0;
    for pool in &out.audit {
        let source = sources[&pool.prompt_id];
        let layout: Vec<(&str, usize)> = pool.candidates.iter().map(|c| (c.system.as_str(), c.index)).collect();
        let want: Vec<(&str, usize)> = ["a", "b", "c"].into_iter().flat_map(|s| (0..5).map(move |i| (s, i))).collect();
        ensure!(layout == want, "{} {}: pool layout {layout:?}", pool.prompt_id, pool.language);

        let mut best: Option<(usize, f64)> = None;
        for (i, c) in pool.candidates.iter().enumerate() {
            ensure!(c.excluded.is_none(), "{} excluded: {:?}", c.text, c.excluded);
            let back = c.back_translation.as_deref().ok_or("missing back-translation")?;
            let (_, _, f1) = oracle(&hash_tokens(back), &hash_tokens(source));
            let got_f1 = c.bert_f1.ok_or("missing F1")?;
            ensure!((got_f1 - f1).abs() < TOL, "F1 {got_f1} vs oracle {f1}");
            let supported = c.system != "c" || matches!(pool.language, TargetLanguage::Es | TargetLanguage::De);
            let combined = if supported {
                let q = qe.score(&QeRequest { source: source.into(), candidate: c.text.clone() }).unwrap().score;
                ensure!(c.qe_score == Some(q), "QE {:?} vs {q}", c.qe_score);
                (f1 + q) / 2.0
            } else {
                ensure!(c.qe_score.is_none(), "unsupported language carried QE {:?}", c.qe_score);
                f1_only += 1;
                f1
            };
            let got = c.combined.ok_or("missing combined score")?;
            ensure!((got - combined).abs() < TOL, "combined {got} vs {combined}");
            if best.is_none_or(|(_, b)| combined > b) {
                best = Some((i, combined));
            }
        }
        ensure!(pool.winner == best.map(|b| b.0), "{} {}: winner {:?}, argmax {:?}", pool.prompt_id, pool.language, pool.winner, best);
    }
    ensure!(f1_only == 20 * 2 * 5, "{f1_only} candidates scored by F1 alone");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (first, second) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    write_audit(&first, &out.audit).map_err(|e| e.to_string())?;
    write_audit(&second, &run(4)?.audit).map_err(|e| e.to_string())?;
    let (x, y) = (std::fs::read(&first).map_err(|e| e.to_string())?, std::fs::read(&second).map_err(|e| e.to_string())?);
    ensure!(x == y, "audit files differ between runs");
    ensure!(elapsed < SELECTION_BUDGET, "took {elapsed:?}");
    Ok(format!("80 pools of 15, argmax winners, {f1_only} F1-only candidates, identical {}-byte audits", x.len()))
}
