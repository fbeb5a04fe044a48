//! Walks one snippet through triage and refinement and assembles the
//! instruction dataset with its card.
//!
//! `cargo run --example sft_dataset`

use std::path::Path;

use plforge::review::TaskKind;
use plforge::sft::{assemble_sft, enqueue_triage, extract_code_files, rank_repos, read_repos, token_gate};
use plforge::store::Store;
use plforge::text::WhitespaceTokenizer;
use plforge::workflow;
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let repos_file = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/sft/repos.jsonl");
    let repos = read_repos(&repos_file)?;
    let top = rank_repos(&repos, 2)?;
    println!("top repositories: {:?}", top.iter().map(|r| (&r.name, r.stars)).collect::<Vec<_>>());

    let base = repos_file.parent().unwrap();
    let files: Vec<_> = top
        .iter()
        .filter_map(|r| Some((r, r.path.as_ref()?)))
        .flat_map(|(r, p)| extract_code_files(&r.name, &base.join(p), &WhitespaceTokenizer))
        .filter(token_gate)
        .collect();
    println!("{} files within the token bounds", files.len());

    let dir = tempfile::tempdir()?;
    let store = Store::open(dir.path())?;
    workflow::enqueue(&store, &enqueue_triage(&files)?)?;

    // a reviewer accepts every triage task and supplies four prompt variants
    for t in workflow::list_tasks(&store, None, Some(TaskKind::SampleTriage))? {
        let (_, refine) = workflow::submit_verdict(&store, &t.task.id, t.version, true, None)?;
        let refine = refine.expect("refinement queued");
        let path = t.task.payload["path"].as_str().unwrap_or_default().to_string();
        let variants = [
            format!("Write the Mojo code in {path}."),
            format!("Implement the program stored at {path} in Mojo."),
            format!("Show a Mojo source file equivalent to {path}."),
            format!("Recreate {path} using Mojo."),
        ];
        let edited = workflow::submit_edit(&store, &refine.task.id, refine.version, json!({"variants": variants}), None)?;
        workflow::submit_verdict(&store, &edited.task.id, edited.version, true, None)?;
    }

    let dataset = assemble_sft(workflow::accepted_pairs(&store)?, &WhitespaceTokenizer)?;
    for p in dataset.pairs.iter().take(4) {
        println!("{}#{}: {}", p.snippet_id, p.variant_index, p.prompt);
    }
    println!("{} pairs", dataset.pairs.len());
    print!("{}", dataset.card.render_table());
    Ok(())
}
