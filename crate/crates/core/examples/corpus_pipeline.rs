//! Ingests the bundled corpus manifest and prints the per-filter table.
//!
//! `cargo run --example corpus_pipeline`

use std::path::Path;

use plforge::corpus::{ingest_sources, read_manifest, run_pipeline, NoFetcher, PipelineConfig};
use plforge::text::WhitespaceTokenizer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus/manifest.jsonl");
    let entries = read_manifest(&manifest)?;
    let ingested = ingest_sources(&entries, &NoFetcher, &WhitespaceTokenizer);
    println!("ingested {} documents from {}", ingested.documents.len(), manifest.display());

    let out = run_pipeline(ingested.documents, &PipelineConfig::default())?;
    print!("{}", out.report.render_table());
    for d in &out.dropped {
        println!("dropped {:<24} {:?}", d.id, d.outcome.stage);
    }
    let kept: Vec<&str> = out.refined.iter().map(|d| d.id.as_str()).collect();
    println!("kept {kept:?}");
    Ok(())
}
