//! The `plforge` command line.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::client::RetryPolicy;
use crate::corpus::{
    ingest_sources, read_manifest, run_pipeline, write_corpus, CommandScorer, Fetcher, HeuristicScorer,
    LanguageScorer, NearDupConfig, NoFetcher, PipelineConfig,
};
use crate::eval::{
    evaluate_model, load_benchmark, render_leaderboard, validate_benchmark, CanonicalGenerator, CommandGenerator,
    EvalError, EvalOptions, EvalReport, Generator, ModelInfo, RunnerAdapter, SandboxPolicy,
};
use crate::plan::{compute_plan, plan_ablation_grid, CheckpointTracker, INSTRUCTION_AXIS, TOKEN_AXIS};
use crate::remote::{Endpoint, HttpEmbedding, HttpFetcher, HttpMt, HttpParaphraser, HttpQe};
use crate::review::{TaskKind, TaskStatus};
use crate::service::{AppState, TOKEN_ENV};
use crate::sft::{
    assemble_sft, enqueue_triage, extract_code_files, generate_all, rank_repos, read_pairs, read_repos, token_gate,
    write_pairs,
};
use crate::store::{RecordKind, Store};
use crate::text::{tokenizer_from_spec, Tokenizer};
use crate::translate::{
    build_msft, write_audit, EmbeddingClient, HashEmbedding, MtClient, QeClient, TargetLanguage,
    TranslateConfig,
};
use crate::translate::stub::{StubMt, StubQe};
use crate::workflow;

#[derive(Debug, Parser)]
#[command(name = "plforge", version, about = "Corpus, instruction-data, translation and evaluation tooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Corpus cleaning
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Instruction dataset construction
    #[command(subcommand)]
    Sft(SftCommand),
    /// Multilingual expansion of an instruction dataset
    Translate(TranslateArgs),
    /// Run a benchmark against a model
    Eval(EvalArgs),
    /// Render a leaderboard from evaluation reports
    Leaderboard(LeaderboardArgs),
    /// Training-plan arithmetic and checkpoint policy
    Plan(PlanArgs),
    /// Serve the HTTP API
    Serve(ServeArgs),
    /// Store maintenance
    #[command(subcommand)]
    Store(StoreCommand),
    /// Interpreter for the bundled test dialect
    #[command(subcommand, hide = true)]
    Stub(StubCommand),
}

#[derive(Debug, Subcommand)]
enum CorpusCommand {
    /// Ingest a manifest and apply the filter pipeline
    Run(CorpusRunArgs),
}

#[derive(Debug, Args)]
struct CorpusRunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Receives refined.jsonl, dropped.jsonl and report.txt
    #[arg(long)]
    out: PathBuf,
    /// Structured report (JSON)
    #[arg(long)]
    report: PathBuf,
    /// `ws` or `plugin:<command>`
    #[arg(long, default_value = "ws")]
    tokenizer: String,
    /// Also drop near-duplicates
    #[arg(long)]
    near_dup: bool,
    /// Drop web documents without a detected license
    #[arg(long)]
    require_web_license: bool,
    /// External language identifier; reads text on stdin, prints `__label__xx <confidence>`
    #[arg(long)]
    langid_cmd: Option<String>,
    /// Allow fetching http(s) manifest entries
    #[arg(long)]
    fetch: bool,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Subcommand)]
enum SftCommand {
    /// Queue triage, fill paraphrases and assemble accepted pairs.
    ///
    /// Safe to rerun: repositories already queued are skipped, and the dataset
    /// is rebuilt from whatever refinements reviewers have accepted so far.
    Build(SftBuildArgs),
}

#[derive(Debug, Args)]
struct SftBuildArgs {
    /// Line-delimited {name, stars, license_tag, path}
    #[arg(long)]
    repos: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Review-queue store directory
    #[arg(long)]
    queue: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "ws")]
    tokenizer: String,
    /// Paraphrase service base URL; pending refinements with a seed prompt get suggestions
    #[arg(long)]
    paraphrase_url: Option<String>,
    #[arg(long, default_value = "PLFORGE_LLM_KEY")]
    paraphrase_key_env: String,
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
}

#[derive(Debug, Args)]
struct TranslateArgs {
    /// English instruction pairs
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "es,de,fr,bn")]
    langs: Vec<TargetLanguage>,
    /// MT system identifiers, in pool order
    #[arg(long, value_delimiter = ',', required = true)]
    systems: Vec<String>,
    /// Audit file with every candidate and its scores
    #[arg(long)]
    audit: PathBuf,
    /// Translated pairs; defaults to msft.jsonl next to the audit file
    #[arg(long)]
    out: Option<PathBuf>,
    /// `SYSTEM=URL` for each HTTP MT system
    #[arg(long = "mt-endpoint")]
    mt_endpoints: Vec<String>,
    /// `SYSTEM=LANG,LANG` restricts what a system supports
    #[arg(long)]
    supports: Vec<String>,
    #[arg(long)]
    qe_url: Option<String>,
    #[arg(long)]
    embed_url: Option<String>,
    /// Use deterministic offline MT, QE and embedding clients
    #[arg(long)]
    stub: bool,
    #[arg(long, default_value_t = 5)]
    candidates: usize,
    /// Also record the pools for adjudication
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    bench: PathBuf,
    /// Adapter TOML, or `stub` for the bundled test dialect
    #[arg(long)]
    adapter: String,
    #[arg(long, default_value_t = 1)]
    samples: u64,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    k: Vec<u64>,
    /// Reads a prompt on stdin and prints a completion; canonical solutions when absent
    #[arg(long)]
    model_cmd: Option<String>,
    #[arg(long, default_value = "model")]
    model_id: String,
    #[arg(long)]
    model_type: Option<String>,
    #[arg(long)]
    parameters: Option<String>,
    #[arg(long)]
    decoding: Option<String>,
    /// Structured report (JSON)
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    #[arg(long, default_value_t = 512)]
    memory_mb: u64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Abort on the first generator failure
    #[arg(long)]
    strict: bool,
    /// Only check that every canonical solution passes
    #[arg(long, conflicts_with = "no_validate")]
    validate_only: bool,
    /// Skip the canonical-solution gate
    #[arg(long)]
    no_validate: bool,
    /// Also store the report
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LeaderboardArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    bd: u64,
    #[arg(long)]
    ga: u64,
    #[arg(long)]
    nd: u64,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    epochs: u64,
    #[arg(long, default_value_t = crate::plan::DEFAULT_SAVE_INTERVAL)]
    interval: u64,
    /// One evaluation loss per line; prints the checkpoint decisions
    #[arg(long)]
    losses: Option<PathBuf>,
    /// Print the ablation grid as well
    #[arg(long)]
    grid: bool,
    #[arg(long)]
    json: bool,
    /// Also store the plan
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Adapter TOML, or `stub`
    #[arg(long, default_value = "stub")]
    adapter: String,
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    #[arg(long, default_value_t = 512)]
    memory_mb: u64,
    #[arg(long, default_value = "ws")]
    tokenizer: String,
    /// Allow pipeline runs to fetch http(s) sources
    #[arg(long)]
    fetch: bool,
}

#[derive(Debug, Subcommand)]
enum StoreCommand {
    /// Write every live record as one JSON line
    Export {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load exported records; newer versions win
    Import {
        #[arg(long)]
        store: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Rewrite the log with live records only
    Compact {
        #[arg(long)]
        store: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum StubCommand {
    Check { file: PathBuf },
    Run { file: PathBuf },
}

/// A failure and its exit status: 1 for a rejected input, 2 for
/// infrastructure and usage errors.
struct Failure(u8, String);

impl Failure {
    fn infra(e: impl std::fmt::Display) -> Self {
        Failure(2, e.to_string())
    }
}

/// Creates the parent directory of an output file.
fn prepare_output(path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::infra(format!("{}: {e}", dir.display())))
        }
        _ => Ok(()),
    }
}

type CliResult = Result<(), Failure>;

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Stub(cmd) = &cli.command {
        let code = match cmd {
            StubCommand::Check { file } => crate::eval::dialect::main("check", file),
            StubCommand::Run { file } => crate::eval::dialect::main("run", file),
        };
        return ExitCode::from(code as u8);
    }
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "plforge=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let result = match cli.command {
        Command::Corpus(CorpusCommand::Run(a)) => corpus_run(a),
        Command::Sft(SftCommand::Build(a)) => sft_build(a),
        Command::Translate(a) => translate(a),
        Command::Eval(a) => eval(a),
        Command::Leaderboard(a) => leaderboard(a),
        Command::Plan(a) => plan(a),
        Command::Serve(a) => serve(a),
        Command::Store(c) => store_cmd(c),
        Command::Stub(_) => unreachable!(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn tokenizer(spec: &str) -> Result<Arc<dyn Tokenizer>, Failure> {
    tokenizer_from_spec(spec).map(Arc::from).map_err(Failure::infra)
}

fn fetcher(enabled: bool) -> Arc<dyn Fetcher> {
    if enabled {
        Arc::new(HttpFetcher::new(Duration::from_secs(30), RetryPolicy::default()))
    } else {
        Arc::new(NoFetcher)
    }
}

fn open_store(dir: &Path) -> Result<Store, Failure> {
    Store::open(dir).map_err(|e| Failure::infra(format!("{}: {e}", dir.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    prepare_output(path)?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::infra(format!("{}: {e}", path.display())))
}

fn corpus_run(a: CorpusRunArgs) -> CliResult {
    let tokenizer = tokenizer(&a.tokenizer)?;
    let manifest = read_manifest(&a.manifest).map_err(Failure::infra)?;
    let ingested = ingest_sources(&manifest, fetcher(a.fetch).as_ref(), tokenizer.as_ref());
    for skip in &ingested.skips {
        tracing::warn!(source = skip.source_ref, "skipped: {}", skip.reason);
    }
    let scorer: Arc<dyn LanguageScorer> = match &a.langid_cmd {
        Some(cmd) => Arc::new(
            CommandScorer::new(cmd).ok_or_else(|| Failure::infra(format!("cannot parse `--langid-cmd {cmd}`")))?,
        ),
        None => Arc::new(HeuristicScorer),
    };
    let config = PipelineConfig {
        tokenizer,
        scorer,
        require_license_for_web: a.require_web_license,
        near_dup: a.near_dup.then(NearDupConfig::default),
        workers: a.workers,
        ..PipelineConfig::default()
    };
    let out = run_pipeline(ingested.documents, &config).map_err(Failure::infra)?;
    std::fs::create_dir_all(&a.out).map_err(Failure::infra)?;
    write_corpus(&a.out.join("refined.jsonl"), &out.refined).map_err(Failure::infra)?;
    let dropped: String =
        out.dropped.iter().map(|d| serde_json::to_string(d).expect("serializable") + "\n").collect();
    std::fs::write(a.out.join("dropped.jsonl"), dropped).map_err(Failure::infra)?;
    let table = out.report.render_table();
    std::fs::write(a.out.join("report.txt"), &table).map_err(Failure::infra)?;
    write_json(&a.report, &out.report)?;
    print!("{table}");
    Ok(())
}

fn sft_build(a: SftBuildArgs) -> CliResult {
    let tokenizer = tokenizer(&a.tokenizer)?;
    let store = open_store(&a.queue)?;
    let repos = read_repos(&a.repos).map_err(|e| Failure::infra(format!("{}: {e}", a.repos.display())))?;
    let top = rank_repos(&repos, a.top).map_err(Failure::infra)?;
    let base = a.repos.parent().unwrap_or(Path::new("."));
    let mut files = Vec::new();
    for repo in &top {
        let Some(path) = &repo.path else {
            tracing::warn!(repo = repo.name, "no local checkout; skipped");
            continue;
        };
        let extracted = extract_code_files(&repo.name, &base.join(path), tokenizer.as_ref());
        let total = extracted.len();
        files.extend(extracted.into_iter().filter(token_gate));
        tracing::info!(repo = repo.name, files = total, "extracted");
    }
    let triage = enqueue_triage(&files).map_err(Failure::infra)?;
    let added = workflow::enqueue(&store, &triage).map_err(Failure::infra)?;
    println!("{} files passed the token gate; {added} newly queued for triage", files.len());

    if let Some(url) = &a.paraphrase_url {
        let provider = HttpParaphraser::new(Endpoint::new(url.clone()).with_key_env(a.paraphrase_key_env.clone()));
        let todo: Vec<_> = workflow::list_tasks(&store, Some(TaskStatus::Pending), Some(TaskKind::PromptRefine))
            .map_err(Failure::infra)?
            .into_iter()
            .filter(|t| t.task.payload["variants"].as_array().is_none_or(|v| v.is_empty()))
            .filter_map(|t| {
                let seed = t.task.payload["seed_prompt"].as_str()?.trim().to_string();
                (!seed.is_empty()).then_some((t, seed))
            })
            .collect();
        let seeds: Vec<(String, String)> = todo.iter().map(|(t, s)| (t.task.id.clone(), s.clone())).collect();
        let results = generate_all(&seeds, &provider, crate::sft::VARIANTS_PER_SNIPPET - 1, &RetryPolicy::default(), a.max_in_flight);
        for ((task, seed), (_, result)) in todo.iter().zip(results) {
            match result {
                Ok(set) => {
                    if let Some(w) = &set.warning {
                        tracing::warn!(task = task.task.id, "{w}");
                    }
                    workflow::suggest_variants(&store, &task.task.id, task.version, set.variants(seed))
                        .map_err(Failure::infra)?;
                }
                Err(e) => tracing::warn!(task = task.task.id, "{e}"),
            }
        }
    }

    let pairs = workflow::accepted_pairs(&store).map_err(Failure::infra)?;
    if pairs.is_empty() {
        println!("no accepted refinements yet; nothing written");
        return Ok(());
    }
    let dataset = assemble_sft(pairs, tokenizer.as_ref()).map_err(Failure::infra)?;
    prepare_output(&a.out)?;
    write_pairs(&a.out, &dataset.pairs).map_err(Failure::infra)?;
    store
        .transact(|t| {
            for p in &dataset.pairs {
                let id = format!("{}#{}@{}", p.snippet_id, p.variant_index, p.language);
                t.upsert(RecordKind::SftPair, &id, serde_json::to_value(p).expect("serializable"))?;
            }
            Ok::<_, crate::store::StoreError>(())
        })
        .map_err(Failure::infra)?;
    println!("{} pairs written to {}", dataset.pairs.len(), a.out.display());
    print!("{}", dataset.card.render_table());
    Ok(())
}

fn split_assignment(s: &str) -> Result<(&str, &str), Failure> {
    s.split_once('=').ok_or_else(|| Failure::infra(format!("expected NAME=VALUE, got `{s}`")))
}

fn translate(a: TranslateArgs) -> CliResult {
    let pairs = read_pairs(&a.input).map_err(|e| Failure::infra(format!("{}: {e}", a.input.display())))?;
    let mut supports: BTreeMap<String, Vec<TargetLanguage>> = BTreeMap::new();
    for s in &a.supports {
        let (sys, langs) = split_assignment(s)?;
        let langs = langs.split(',').map(str::parse).collect::<Result<Vec<_>, _>>().map_err(Failure::infra)?;
        supports.insert(sys.to_string(), langs);
    }
    let mut endpoints: BTreeMap<String, String> = BTreeMap::new();
    for s in &a.mt_endpoints {
        let (sys, url) = split_assignment(s)?;
        endpoints.insert(sys.to_string(), url.to_string());
    }
    let mut systems: Vec<Arc<dyn MtClient>> = Vec::new();
    for id in &a.systems {
        let langs = supports.get(id).cloned();
        let system: Arc<dyn MtClient> = match (endpoints.get(id), a.stub) {
            (Some(url), _) => Arc::new(HttpMt::new(
                id.clone(),
                Endpoint::new(url.clone()).with_key_env("PLFORGE_MT_KEY"),
                langs.unwrap_or_default(),
            )),
            (None, true) => match langs {
                Some(l) => Arc::new(StubMt::supporting(id, &l)),
                None => Arc::new(StubMt::new(id)),
            },
            (None, false) => return Err(Failure::infra(format!("system `{id}` has no --mt-endpoint (or pass --stub)"))),
        };
        systems.push(system);
    }
    let qe: Option<Box<dyn QeClient>> = match (&a.qe_url, a.stub) {
        (Some(url), _) => Some(Box::new(HttpQe::new(Endpoint::new(url.clone()).with_key_env("PLFORGE_QE_KEY")))),
        (None, true) => Some(Box::new(StubQe)),
        (None, false) => {
            tracing::warn!("no QE client; candidates are ranked by BERTScore alone");
            None
        }
    };
    let embedder: Box<dyn EmbeddingClient> = match &a.embed_url {
        Some(url) => Box::new(HttpEmbedding::new(Endpoint::new(url.clone()).with_key_env("PLFORGE_EMBED_KEY"))),
        None => {
            if !a.stub {
                tracing::warn!("no embedding service; using hashed token vectors");
            }
            Box::new(HashEmbedding::default())
        }
    };
    let config = TranslateConfig {
        candidates_per_system: a.candidates,
        retry: if a.stub { RetryPolicy::immediate() } else { RetryPolicy::default() },
        workers: a.workers,
        ..TranslateConfig::default()
    };
    let out = build_msft(&pairs, &a.langs, &systems, qe.as_deref(), embedder.as_ref(), &config).map_err(Failure::infra)?;
    prepare_output(&a.audit)?;
    write_audit(&a.audit, &out.audit).map_err(Failure::infra)?;
    let out_path = a.out.clone().unwrap_or_else(|| a.audit.with_file_name("msft.jsonl"));
    prepare_output(&out_path)?;
    let mut all = pairs.clone();
    all.extend(out.records.iter().cloned());
    write_pairs(&out_path, &all).map_err(Failure::infra)?;
    if let Some(dir) = &a.store {
        let store = open_store(dir)?;
        workflow::record_pools(&store, &out.audit).map_err(Failure::infra)?;
    }
    for gap in &out.gaps {
        tracing::warn!(prompt = gap.prompt_id, language = %gap.language, "unresolved: {}", gap.reason);
    }
    println!(
        "{} source pairs, {} translations, {} unresolved; wrote {} and {}",
        pairs.len(),
        out.records.len(),
        out.gaps.len(),
        out_path.display(),
        a.audit.display()
    );
    Ok(())
}

fn load_adapter(spec: &str) -> Result<RunnerAdapter, Failure> {
    if spec == "stub" {
        let exe = std::env::current_exe().map_err(Failure::infra)?;
        return Ok(RunnerAdapter::stub(exe));
    }
    RunnerAdapter::load(Path::new(spec)).map_err(Failure::infra)
}

fn policy(timeout: f64, memory_mb: u64) -> Result<SandboxPolicy, Failure> {
    let p = SandboxPolicy { timeout_secs: timeout, memory_bytes: memory_mb * 1024 * 1024, ..SandboxPolicy::default() };
    p.validate().map_err(Failure::infra)?;
    Ok(p)
}

fn eval_failure(e: EvalError) -> Failure {
    Failure::infra(e)
}

fn eval(a: EvalArgs) -> CliResult {
    let tasks = load_benchmark(&a.bench).map_err(eval_failure)?;
    let adapter = load_adapter(&a.adapter)?;
    let policy = policy(a.timeout, a.memory_mb)?;
    if !a.no_validate {
        let report = validate_benchmark(&tasks, &adapter, &policy, a.workers).map_err(eval_failure)?;
        println!("benchmark: {}", report.summary());
        if !report.is_valid() {
            return Err(Failure(1, "benchmark rejected: canonical solutions must pass".into()));
        }
        if a.validate_only {
            return Ok(());
        }
    }
    let generator: Box<dyn Generator> = match &a.model_cmd {
        Some(cmd) => Box::new(CommandGenerator::new(cmd).map_err(eval_failure)?),
        None => Box::new(CanonicalGenerator),
    };
    let model = ModelInfo { id: a.model_id.clone(), kind: a.model_type.clone(), parameters: a.parameters.clone() };
    let options = EvalOptions { samples: a.samples, ks: a.k.clone(), workers: a.workers, strict: a.strict, decoding: a.decoding.clone() };
    let report = evaluate_model(model, generator.as_ref(), &tasks, &options, &adapter, &policy).map_err(eval_failure)?;
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    if let Some(dir) = &a.store {
        let store = open_store(dir)?;
        let id = format!("{}-{}", report.model.id, report.metadata.created_unix);
        store
            .upsert(RecordKind::EvalReport, &id, json!({ "status": "done", "report": report }))
            .map_err(Failure::infra)?;
    }
    print!("{}", report.render_table());
    Ok(())
}

fn leaderboard(a: LeaderboardArgs) -> CliResult {
    let mut reports = Vec::new();
    for path in &a.reports {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::infra(format!("{}: {e}", path.display())))?;
        let report: EvalReport =
            serde_json::from_str(&text).map_err(|e| Failure::infra(format!("{}: {e}", path.display())))?;
        reports.push(report);
    }
    let board = render_leaderboard(&reports);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&board).expect("serializable"));
    } else {
        print!("{}", board.render_table());
    }
    Ok(())
}

fn plan(a: PlanArgs) -> CliResult {
    let mut plan = compute_plan(a.bd, a.ga, a.nd, a.n, a.epochs).map_err(Failure::infra)?;
    plan.save_interval = a.interval;
    let mut decisions = Vec::new();
    let mut best = None;
    if let Some(path) = &a.losses {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::infra(format!("{}: {e}", path.display())))?;
        let mut tracker = CheckpointTracker::new(a.interval);
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let loss: f64 = line.trim().parse().map_err(|e| Failure::infra(format!("line {}: {e}", i + 1)))?;
            decisions.push(tracker.observe(loss));
        }
        best = tracker.best_step;
    }
    let grid = if a.grid { Some(plan_ablation_grid(&TOKEN_AXIS, &INSTRUCTION_AXIS).map_err(Failure::infra)?) } else { None };
    let record = json!({ "plan": plan, "checkpoints": decisions, "best_step": best, "grid": grid });
    if let Some(dir) = &a.store {
        let store = open_store(dir)?;
        let id = format!("bd{}-ga{}-nd{}-n{}-e{}", a.bd, a.ga, a.nd, a.n, a.epochs);
        store.upsert(RecordKind::Plan, &id, record.clone()).map_err(Failure::infra)?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&record).expect("serializable"));
        return Ok(());
    }
    print!("{plan}");
    let saved: Vec<String> = decisions
        .iter()
        .filter(|d| d.action == crate::plan::CheckpointAction::Save)
        .map(|d| d.step.to_string())
        .collect();
    if !decisions.is_empty() {
        println!("checkpoints saved at steps {}", saved.join(", "));
        if let Some(b) = best {
            println!("best checkpoint: step {b}");
        }
    }
    if let Some(grid) = grid {
        println!("ablation grid: {} cells", grid.len());
        for c in grid {
            println!("  tokens {:>9}  instructions {:>4}", c.token_budget, c.instruction_count);
        }
    }
    Ok(())
}

fn serve(a: ServeArgs) -> CliResult {
    let store = Arc::new(open_store(&a.store)?);
    let mut state = AppState::new(store, load_adapter(&a.adapter)?);
    state.token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
    if state.token.is_none() {
        tracing::warn!("{TOKEN_ENV} is not set; the API accepts unauthenticated requests");
    }
    state.policy = policy(a.timeout, a.memory_mb)?;
    state.tokenizer = tokenizer(&a.tokenizer)?;
    state.fetcher = fetcher(a.fetch);
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::infra)?;
    runtime.block_on(crate::service::serve(Arc::new(state), a.addr)).map_err(Failure::infra)
}

fn store_cmd(c: StoreCommand) -> CliResult {
    match c {
        StoreCommand::Export { store, out } => {
            let n = open_store(&store)?.export(&out).map_err(Failure::infra)?;
            println!("exported {n} records");
        }
        StoreCommand::Import { store, input } => {
            let n = open_store(&store)?.import(&input).map_err(Failure::infra)?;
            println!("imported {n} records");
        }
        StoreCommand::Compact { store } => open_store(&store)?.compact().map_err(Failure::infra)?,
    }
    Ok(())
}
