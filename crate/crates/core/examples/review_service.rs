//! Starts the HTTP API on an ephemeral port with a seeded review queue and
//! drives it with a plain HTTP client.
//!
//! `cargo run --example review_service`

use std::sync::Arc;

use plforge::eval::RunnerAdapter;
use plforge::review::{ReviewTask, TaskKind};
use plforge::service::{router, AppState};
use plforge::store::Store;
use plforge::workflow;
use serde_json::{json, Value};

const TOKEN: &str = "example-token";

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = Arc::new(Store::open(dir.path())?);
    let payload = json!({"snippet_id": "demo/hello.mojo", "source": "fn main():\n    print(\"hello\")"});
    workflow::enqueue(&store, &[ReviewTask::pending("triage:demo/hello.mojo", TaskKind::SampleTriage, payload)])?;

    let mut state = AppState::new(store, RunnerAdapter::stub("plforge"));
    state.token = Some(TOKEN.into());
    let state = Arc::new(state);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    tokio::spawn(async move { axum::serve(listener, router(state)).await });

    tokio::task::spawn_blocking(move || -> Result<(), ureq::Error> {
        let auth = format!("Bearer {TOKEN}");
        let listing = ureq::get(format!("{base}/review-tasks")).header("Authorization", &auth).header("Accept", "text/plain").call()?.body_mut().read_to_string()?;
        print!("{listing}");

        let task: Value = ureq::get(format!("{base}/review-tasks/triage:demo%2Fhello.mojo")).header("Authorization", &auth).call()?.body_mut().read_json()?;
        let version = task["version"].clone();
        let verdict: Value = ureq::post(format!("{base}/review-tasks/triage:demo%2Fhello.mojo/verdict"))
            .header("Authorization", &auth)
            .send_json(json!({"action": "accept", "version": version, "note": "clean sample"}))?
            .body_mut()
            .read_json()?;
        println!("{}", serde_json::to_string_pretty(&verdict).unwrap());
        Ok(())
    })
    .await??;
    Ok(())
}
