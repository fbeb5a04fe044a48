//! Translates a few prompts with the offline clients and shows how each
//! pool picked its winner.
//!
//! `cargo run --example translation_selection`

use std::sync::Arc;

use plforge::sft::pairs_for_snippet;
use plforge::translate::stub::{StubMt, StubQe};
use plforge::translate::{build_msft, HashEmbedding, MtClient, QeClient, TargetLanguage, TranslateConfig};

fn main() -> Result<(), String> {
    let variants = [
        "Write a function that adds two integers in Mojo.",
        "Implement integer addition as a Mojo function.",
        "Create a Mojo function returning the sum of two numbers.",
        "Show how to add two Int values with a Mojo function.",
    ]
    .map(String::from);
    let pairs = pairs_for_snippet("demo/add.mojo", "fn add(a: Int, b: Int) -> Int:\n    return a + b", &variants);
    let systems: Vec<Arc<dyn MtClient>> = vec![
        Arc::new(StubMt::new("alpha")),
        Arc::new(StubMt::new("beta")),
        Arc::new(StubMt::supporting("gamma", &[TargetLanguage::Es, TargetLanguage::De])),
    ];
    let languages = [TargetLanguage::Es, TargetLanguage::Bn];
    let out = build_msft(
        &pairs,
        &languages,
        &systems,
        Some(&StubQe as &dyn QeClient),
        &HashEmbedding::default(),
        &TranslateConfig::default(),
    )?;

    for pool in &out.audit {
        let Some(w) = pool.winner else { continue };
        let c = &pool.candidates[w];
        println!(
            "{} {}: {} of {} candidates, winner {}#{} combined {:.3} (F1 {:.3}, QE {:?})",
            pool.prompt_id,
            pool.language,
            pool.candidates.len(),
            pool.candidates.len(),
            c.system,
            c.index,
            c.combined.unwrap_or_default(),
            c.bert_f1.unwrap_or_default(),
            c.qe_score,
        );
    }
    println!("{} translated pairs, {} gaps", out.records.len(), out.gaps.len());
    Ok(())
}
