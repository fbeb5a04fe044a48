use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use plforge::corpus::{
    f4_repetition, f5_dedup, run_pipeline, OriginKind, PipelineConfig, RawDocument, RepetitionThresholds, Stage,
};
use plforge::text::WhitespaceTokenizer;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use crate::{ensure, Outcome};

const PIPELINE_BUDGET: Duration = Duration::from_secs(5);
const DEDUP_CASES: u32 = 1000;

const TOPICS: [&str; 5] = ["SIMD", "List", "String", "Tensor", "Dict"];

fn prose(i: usize) -> String {
    let t = TOPICS[i % TOPICS.len()];
    format!(
        "This is note {i} of the guide, and it shows how you can use the {t} type in your own code.\n\n\
         The function below is a small example that we will use to explain how the {t} type works when it is called.\n\n\
         ```mojo\nfn example_{i}(x: Int) -> Int:\n    return x * {i}\n```\n\n\
         When you run the program, the result is printed and you can compare it with the value in the test."
    )
}

fn doc(id: &str, kind: OriginKind, license: Option<&str>, body: String) -> RawDocument {
    let source = format!("{id}.md");
    RawDocument::new(id, source, kind, license.map(String::from), body, &WhitespaceTokenizer)
}

fn foreign(k: usize) -> String {
    match k % 3 {
        0 => format!(
            "Este es el manual {k} de la lengua y en el texto se explica como se usa el tipo con los datos.\n\n\
             La función de abajo es un ejemplo para que los usuarios vean lo que hace el programa.\n\n\
             Cuando se ejecuta el programa, el resultado se muestra en la pantalla y se puede comparar con el valor."
        ),
        1 => format!(
            "Das ist die Anleitung {k} für die Sprache und sie zeigt, wie man den Typ in dem eigenen Code verwenden kann.\n\n\
             Die Funktion unten ist ein kleines Beispiel, das wir für die Erklärung nutzen.\n\n\
             Wenn das Programm läuft, wird das Ergebnis auf dem Bildschirm angezeigt und mit dem Wert verglichen."
        ),
        _ => format!(
            "Ceci est le guide {k} de la langue et il montre comment on peut utiliser le type dans le code.\n\n\
             La fonction ci-dessous est un petit exemple que nous utilisons pour expliquer le type.\n\n\
             Quand le programme est lancé, le résultat est affiché sur l'écran et il est comparé avec la valeur."
        ),
    }
}

/// Twenty clean documents plus five designated violators per filter.
/// Returns the corpus and the stage each violator must be dropped at.
pub fn fixture() -> (Vec<RawDocument>, BTreeMap<String, Stage>, Vec<String>) {
    let clean_origins: [(OriginKind, Option<&str>); 4] = [
        (OriginKind::Repository, Some("Apache-2.0")),
        (OriginKind::Documentation, None),
        (OriginKind::Blog, Some("Apache License 2.0")),
        (OriginKind::Repository, Some("apache-2.0")),
    ];
    let f1_origins: [(OriginKind, Option<&str>); 5] = [
        (OriginKind::Repository, Some("MIT")),
        (OriginKind::Repository, None),
        (OriginKind::Documentation, Some("GPL-3.0")),
        (OriginKind::Blog, Some("BSD-3-Clause")),
        (OriginKind::Repository, Some("MIT License")),
    ];
    let apache = Some("Apache-2.0");

    let mut corpus = Vec::new();
    let mut expected = BTreeMap::new();
    let mut clean_ids = Vec::new();
    let mut clean_bodies = Vec::new();
    for round in 0..5 {
        for (j, &(kind, license)) in clean_origins.iter().enumerate() {
            let i = round * 4 + j;
            let id = format!("clean-{i:02}");
            clean_ids.push(id.clone());
            clean_bodies.push((prose(i), kind, license));
            corpus.push(doc(&id, kind, license, prose(i)));
        }

        let (kind, license) = f1_origins[round];
        corpus.push(doc(&format!("f1-{round}"), kind, license, prose(100 + round)));

        let p = prose(200 + round);
        let f2_body = match round {
            0 => format!("{p}\n\n```python\nprint('hi')\n```"),
            1 => format!("#!/usr/bin/env python3\n{p}"),
            2 => format!("{p}\n\nimport numpy as np"),
            3 => format!("{p}\n\n~~~py\nx = 1\n~~~"),
            _ => format!("import os.path\n\n{p}"),
        };
        corpus.push(doc(&format!("f2-{round}"), OriginKind::Repository, apache, f2_body));

        let f3_body = match round {
            0 => format!("One short paragraph about Mojo number {round}."),
            1 => format!("First paragraph {round} is here.\n\nSecond and last paragraph."),
            2 => format!("A paragraph {round} of text.\n\nok\n\nThe end."),
            3 => format!("```mojo\nfn f{round}():\n    pass\n```"),
            _ => format!("x{round}\n\n\n\nyz"),
        };
        corpus.push(doc(&format!("f3-{round}"), OriginKind::Documentation, apache, f3_body));

        let spam = format!("Buy the best Mojo course number {round} today and learn everything you need to know.");
        let f4_body = format!("{}\n\n{spam}\n\n{spam}\n\n{spam}\n\n{spam}", prose(300 + round));
        corpus.push(doc(&format!("f4-{round}"), OriginKind::Blog, apache, f4_body));

        corpus.push(doc(&format!("f6-{round}"), OriginKind::Documentation, apache, foreign(round)));

        // whitespace-only variation of a clean document from this round
        let (body, kind, license) = &clean_bodies[round * 4];
        let copy = format!("  {}\n", body.replace("\n\n", "\n\n\n").replace(". ", ".  "));
        corpus.push(doc(&format!("f5-{round}"), *kind, *license, copy));

        for (stage, prefix) in
            [(Stage::F1, "f1"), (Stage::F2, "f2"), (Stage::F3, "f3"), (Stage::F4, "f4"), (Stage::F5, "f5"), (Stage::F6, "f6")]
        {
            expected.insert(format!("{prefix}-{round}"), stage);
        }
    }
    (corpus, expected, clean_ids)
}

pub fn pipeline_fixture() -> Outcome {
    let (corpus, expected, clean_ids) = fixture();
    ensure!(corpus.len() == 50, "fixture has {} documents", corpus.len());
    let whitespace_tokens: BTreeMap<String, u64> =
        corpus.iter().map(|d| (d.id.clone(), d.body.split_whitespace().count() as u64)).collect();

    let started = Instant::now();
    let out = run_pipeline(corpus, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();

    let dropped: BTreeMap<String, Stage> = out.dropped.iter().map(|d| (d.id.clone(), d.outcome.stage)).collect();
    ensure!(dropped == expected, "dropped {dropped:?}, expected {expected:?}");
    let refined: Vec<&str> = out.refined.iter().map(|d| d.id.as_str()).collect();
    ensure!(refined == clean_ids, "refined ids {refined:?}");

    let samples: Vec<u64> = out.report.rows.iter().map(|r| r.samples).collect();
    ensure!(out.report.input_samples == 50 && samples == [45, 40, 35, 30, 25, 20], "stage samples {samples:?}");
    let mut survivors: HashSet<String> = whitespace_tokens.keys().cloned().collect();
    let mut previous = out.report.input_tokens;
    ensure!(previous == whitespace_tokens.values().sum::<u64>(), "input tokens {previous}");
    for row in &out.report.rows {
        survivors.retain(|id| expected.get(id).is_none_or(|s| *s > row.stage));
        let oracle: u64 = survivors.iter().map(|id| whitespace_tokens[id]).sum();
        ensure!(row.tokens == oracle, "{:?} tokens {} != {oracle}", row.stage, row.tokens);
        ensure!(row.tokens <= previous, "{:?} tokens increased", row.stage);
        previous = row.tokens;
    }

    let table = out.report.render_table();
    let lines: Vec<&str> = table.lines().collect();
    ensure!(lines.len() == 9, "table has {} lines", lines.len());
    ensure!(
        lines[0].starts_with("Filter") && lines[0].contains("# Tokens") && lines[0].contains("# Samples"),
        "header `{}`",
        lines[0]
    );
    let labels: Vec<&str> = lines[2..].iter().map(|l| l.split_whitespace().next().unwrap_or("")).collect();
    ensure!(labels == ["None", "F1", "F2", "F3", "F4", "F5", "F6"], "row labels {labels:?}");
    ensure!(elapsed < PIPELINE_BUDGET, "took {elapsed:?}");
    Ok(format!("50 -> 20 documents, 5 drops per filter, tokens {} -> {}", out.report.input_tokens, previous))
}

/// A paragraph of exactly `len` characters, distinct for each `tag`.
fn para(tag: usize, len: usize) -> String {
    let head = format!("p{tag}-");
    assert!(len > head.len());
    format!("{head}{}", "x".repeat(len - head.len()))
}

/// Exact fractions counted independently of the filter.
fn fractions(paragraphs: &[String]) -> Fractions {
    let mut seen = HashSet::new();
    let (mut dup, mut dup_chars, mut chars) = (0, 0, 0);
    for p in paragraphs {
        let n = p.chars().count() as u64;
        chars += n;
        if !seen.insert(p) {
            dup += 1;
            dup_chars += n;
        }
    }
    ((dup, paragraphs.len() as u64), (dup_chars, chars))
}

fn same_ratio(a: (u64, u64), b: (u64, u64)) -> bool {
    a.0 * b.1 == b.0 * a.1
}

/// Repeated-paragraph and repeated-character fractions as (numerator, denominator).
type Fractions = ((u64, u64), (u64, u64));

fn case(paragraphs: Vec<String>) -> (RawDocument, Fractions) {
    let f = fractions(&paragraphs);
    (doc("f4-boundary", OriginKind::Blog, Some("Apache-2.0"), paragraphs.join("\n\n")), f)
}

pub fn repetition_boundaries() -> Outcome {
    let thresholds = RepetitionThresholds::default();

    // 10 paragraphs, 7 distinct: 3 short repeats keep the character share low
    let mut p30: Vec<String> = (0..6).map(|i| para(i, 100)).collect();
    p30.extend(std::iter::repeat_n(para(99, 10), 4));
    // 100 paragraphs, 69 distinct
    let mut p31: Vec<String> = (0..68).map(|i| para(i, 100)).collect();
    p31.extend(std::iter::repeat_n(para(99, 10), 32));
    // 200 characters, one 40-character repeat
    let mut c20: Vec<String> = (0..8).map(|i| para(i, 15)).collect();
    c20.extend(std::iter::repeat_n(para(99, 40), 2));
    // 100 characters, one 21-character repeat
    let mut c21: Vec<String> = (0..7).map(|i| para(i, 7)).collect();
    c21.push(para(8, 9));
    c21.extend(std::iter::repeat_n(para(99, 21), 2));

    let cases = [
        ("paragraphs 0.30", p30, (3, 10), true, 0),
        ("paragraphs 0.31", p31, (31, 100), false, 0),
        ("characters 0.20", c20, (20, 100), true, 1),
        ("characters 0.21", c21, (21, 100), false, 1),
    ];
    for (name, paragraphs, target, keep, which) in cases {
        let (d, (by_para, by_char)) = case(paragraphs);
        let measured = if which == 0 { by_para } else { by_char };
        ensure!(same_ratio(measured, target), "{name}: fixture measures {measured:?}");
        if which == 1 {
            ensure!(by_para.0 * 10 <= by_para.1 * 3, "{name}: paragraph fraction {by_para:?} would trigger first");
        }
        let outcome = f4_repetition(&d, &thresholds);
        ensure!(outcome.kept == keep, "{name}: kept={} ({})", outcome.kept, outcome.reason);
    }
    Ok("0.30 kept, 0.31 dropped, 0.20 kept, 0.21 dropped".into())
}

fn corpus_strategy() -> impl Strategy<Value = Vec<String>> {
    let word = prop::sample::select(vec!["a", "b", "fn", "x"]);
    let sep = prop::sample::select(vec![" ", "  ", "\n", "\t", " \n "]);
    let body = prop::collection::vec((word, sep), 0..5).prop_map(|parts| {
        parts.into_iter().map(|(w, s)| format!("{w}{s}")).collect::<String>()
    });
    prop::collection::vec(body, 0..30)
}

pub fn dedup_properties() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: DEDUP_CASES, failure_persistence: None, ..Config::default() });
    runner
        .run(&corpus_strategy(), |bodies| {
            let docs: Vec<RawDocument> = bodies
                .iter()
                .enumerate()
                .map(|(i, b)| doc(&format!("d{i}"), OriginKind::Other, None, b.clone()))
                .collect();
            let mut seen = HashSet::new();
            let oracle: Vec<String> = bodies
                .iter()
                .enumerate()
                .filter(|(_, b)| seen.insert(b.split_whitespace().collect::<Vec<_>>().join(" ")))
                .map(|(i, _)| format!("d{i}"))
                .collect();

            let (kept, dropped) = f5_dedup(docs.clone());
            let kept_ids: Vec<String> = kept.iter().map(|d| d.id.clone()).collect();
            prop_assert_eq!(&kept_ids, &oracle);
            let expected_dropped: Vec<String> =
                docs.iter().map(|d| d.id.clone()).filter(|id| !oracle.contains(id)).collect();
            prop_assert_eq!(dropped, expected_dropped);

            let (again, none) = f5_dedup(kept.clone());
            prop_assert!(none.is_empty());
            prop_assert_eq!(again, kept);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{DEDUP_CASES} random corpora"))
}
