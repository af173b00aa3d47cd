//! Command-line entry points: `generate`, `run`, and `eval` tie dataset
//! generation, classification, and scoring into reproducible batch runs.
//!
//! Exit codes: 0 success, 1 runtime or partial failure, 2 usage or
//! configuration error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::catalog::{load_catalog, HazardCatalog};
use crate::classify::{
    Backend, BackendConfig, BackendKind, ClassifyError, StoredOutcome,
};
use crate::eval::{aggregate, episode_metrics, render_table, ResultsFile};
use crate::graph::parse_scene_graph;
use crate::prompt::PromptVariant;
use crate::scenario::{
    atomic_write, generate_dataset, read_dataset_dir, shipped_base_scenes, write_dataset_dir,
    BaseScene, Episode,
};

#[derive(Parser)]
#[command(
    name = "hazardscan",
    version,
    about = "Scene-graph hazard detection benchmark harness"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of benchmark episodes
    Generate {
        /// Catalog JSON file (defaults to the embedded catalog)
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Directory of base-scene JSON files (defaults to the embedded scenes)
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Number of episodes to generate
        #[arg(long)]
        count: usize,
        /// Master seed; the dataset is a pure function of it
        #[arg(long)]
        seed: u64,
        /// Output directory for episode files and the manifest
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify every episode of a dataset with a configured backend
    Run {
        /// Dataset directory produced by `generate`
        #[arg(long)]
        dataset: PathBuf,
        /// Prompt variant: object-list-ec, scene-description-ec, sg-no-c,
        /// e-sg-no-c, sg-c, e-sg-c, or cot-sg-c
        #[arg(long)]
        variant: String,
        /// Backend kind, overriding the config file: oracle or llm
        #[arg(long)]
        backend: Option<String>,
        /// Backend config JSON file (defaults to a noise-free oracle)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Catalog JSON file for the oracle (defaults to the embedded catalog)
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Maximum simultaneous backend calls
        #[arg(long, default_value_t = 1)]
        concurrency: usize,
        /// Output directory for outcome files and run metadata
        #[arg(long)]
        out: PathBuf,
        /// Persist full request/response transcripts as JSON lines
        #[arg(long)]
        save_transcripts: bool,
    },
    /// Score classification outcomes against ground truth
    Eval {
        /// Dataset directory with ground truth
        #[arg(long)]
        dataset: PathBuf,
        /// Directory of outcome files from `run`
        #[arg(long)]
        outcomes: PathBuf,
        /// Results JSON file to write
        #[arg(long)]
        out: PathBuf,
    },
}

/// Errors split by the exit code they map to.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2: bad flags or configuration.
    Usage(String),
    /// Exit 1: runtime or partial failure.
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn usage<E: std::fmt::Display>(err: E) -> CliError {
    CliError::Usage(err.to_string())
}

fn runtime<E: std::fmt::Display>(err: E) -> CliError {
    CliError::Runtime(err.to_string())
}

/// Parses arguments from the process environment and runs the selected
/// command.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate {
            catalog,
            scenes,
            count,
            seed,
            out,
        } => cmd_generate(catalog.as_deref(), scenes.as_deref(), count, seed, &out),
        Command::Run {
            dataset,
            variant,
            backend,
            config,
            catalog,
            concurrency,
            out,
            save_transcripts,
        } => cmd_run(RunArgs {
            dataset,
            variant,
            backend,
            config,
            catalog,
            concurrency,
            out,
            save_transcripts,
        }),
        Command::Eval {
            dataset,
            outcomes,
            out,
        } => cmd_eval(&dataset, &outcomes, &out),
    }
}

fn load_catalog_arg(path: Option<&Path>) -> Result<HazardCatalog, CliError> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read catalog {}: {e}", path.display())))?;
            load_catalog(&text).map_err(usage)
        }
        None => Ok(HazardCatalog::shipped_default()),
    }
}

fn load_scenes_arg(path: Option<&Path>) -> Result<Vec<BaseScene>, CliError> {
    let Some(dir) = path else {
        return Ok(shipped_base_scenes());
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| usage(format!("cannot read scene directory {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(usage(format!(
            "no .json scene files in {}",
            dir.display()
        )));
    }
    let mut scenes = Vec::with_capacity(files.len());
    for file in files {
        let text = fs::read_to_string(&file)
            .map_err(|e| usage(format!("cannot read scene {}: {e}", file.display())))?;
        let graph = parse_scene_graph(&text)
            .map_err(|e| usage(format!("scene {}: {e}", file.display())))?;
        let id = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        scenes.push(BaseScene { id, graph });
    }
    Ok(scenes)
}

/// `generate`: write `count` episodes plus a manifest. Bit-identical
/// output for identical inputs.
pub fn cmd_generate(
    catalog_path: Option<&Path>,
    scenes_path: Option<&Path>,
    count: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    if count == 0 {
        return Err(CliError::Usage("--count must be at least 1".to_string()));
    }
    let catalog = load_catalog_arg(catalog_path)?;
    let scenes = load_scenes_arg(scenes_path)?;
    let episodes = generate_dataset(&catalog, &scenes, count, seed).map_err(runtime)?;
    write_dataset_dir(out, &episodes, seed).map_err(runtime)?;
    println!(
        "generated {} episodes (seed {}) into {}",
        episodes.len(),
        seed,
        out.display()
    );
    Ok(())
}

pub struct RunArgs {
    pub dataset: PathBuf,
    pub variant: String,
    pub backend: Option<String>,
    pub config: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub concurrency: usize,
    pub out: PathBuf,
    pub save_transcripts: bool,
}

/// `run`: classify every episode, writing one outcome file per episode
/// plus run metadata. Episodes that fail are logged and recorded; the
/// command exits 1 if any failed.
pub fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    if args.concurrency == 0 {
        return Err(CliError::Usage("--concurrency must be at least 1".to_string()));
    }
    let variant: PromptVariant = args.variant.parse().map_err(usage)?;
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<BackendConfig>(&text)
                .map_err(|e| usage(format!("config {}: {e}", path.display())))?
        }
        None => BackendConfig::oracle(),
    };
    if let Some(kind) = &args.backend {
        cfg.kind = match kind.as_str() {
            "oracle" => BackendKind::Oracle,
            "llm" => BackendKind::Llm,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown backend \"{other}\"; valid values: oracle, llm"
                )))
            }
        };
    }
    let catalog = load_catalog_arg(args.catalog.as_deref())?;
    let backend = Backend::from_config(&cfg, &catalog).map_err(|e| match e {
        ClassifyError::MissingCredential(_) | ClassifyError::InvalidConfig(_) => usage(e),
        other => runtime(other),
    })?;
    let (_, episodes) = read_dataset_dir(&args.dataset).map_err(runtime)?;

    fs::create_dir_all(&args.out).map_err(runtime)?;
    let started_at = chrono::Utc::now();
    let results = classify_all(&backend, &episodes, variant, args.concurrency);
    let finished_at = chrono::Utc::now();

    let mut failed_ids = Vec::new();
    let mut transcripts = Vec::new();
    for (episode, result) in episodes.iter().zip(results) {
        match result {
            Ok(mut outcome) => {
                if args.save_transcripts {
                    for exchange in &outcome.raw_exchange {
                        transcripts.push(serde_json::json!({
                            "episode_id": episode.episode_id,
                            "stage": exchange.stage,
                            "request": exchange.request,
                            "response": exchange.response,
                        }));
                    }
                }
                // Transcripts live in the JSONL file; keep outcome files lean.
                outcome.raw_exchange.clear();
                let stored = StoredOutcome {
                    episode_id: episode.episode_id.clone(),
                    variant: variant.name().to_string(),
                    outcome,
                };
                let mut text =
                    serde_json::to_string_pretty(&stored).expect("outcome serialization");
                text.push('\n');
                let path = args.out.join(format!("{}.json", episode.episode_id));
                atomic_write(&path, text.as_bytes()).map_err(runtime)?;
            }
            Err(err) => {
                eprintln!("episode {} failed: {err}", episode.episode_id);
                failed_ids.push(episode.episode_id.clone());
            }
        }
    }

    if args.save_transcripts {
        let mut file = fs::File::create(args.out.join("transcripts.jsonl")).map_err(runtime)?;
        for line in &transcripts {
            writeln!(file, "{line}").map_err(runtime)?;
        }
    }

    let config_json = serde_json::to_string(&cfg).expect("config serialization");
    let meta = serde_json::json!({
        "variant": variant.name(),
        "backend": match cfg.kind { BackendKind::Oracle => "oracle", BackendKind::Llm => "llm" },
        "model_name": cfg.model_name,
        "config_sha256": hex_digest(&config_json),
        "started_at": started_at.to_rfc3339(),
        "finished_at": finished_at.to_rfc3339(),
        "episodes": episodes.len(),
        "failed_episode_ids": failed_ids,
    });
    let mut meta_text = serde_json::to_string_pretty(&meta).expect("metadata serialization");
    meta_text.push('\n');
    atomic_write(&args.out.join("run_meta.json"), meta_text.as_bytes()).map_err(runtime)?;

    if failed_ids.is_empty() {
        println!(
            "classified {} episodes ({}, {}) into {}",
            episodes.len(),
            variant.name(),
            match cfg.kind {
                BackendKind::Oracle => "oracle",
                BackendKind::Llm => "llm",
            },
            args.out.display()
        );
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "{} of {} episodes failed",
            failed_ids.len(),
            episodes.len()
        )))
    }
}

type ClassifyResult = Result<crate::classify::ClassificationOutcome, ClassifyError>;

/// Classifies episodes with at most `concurrency` simultaneous backend
/// calls. Results are returned in episode order regardless of
/// scheduling.
fn classify_all(
    backend: &Backend,
    episodes: &[Episode],
    variant: PromptVariant,
    concurrency: usize,
) -> Vec<ClassifyResult> {
    let slots: Vec<Mutex<Option<ClassifyResult>>> =
        episodes.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = concurrency.min(episodes.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= episodes.len() {
                    break;
                }
                let result = backend.classify_episode(&episodes[index], variant);
                *slots[index].lock().expect("result slot poisoned") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("result slot poisoned")
                .expect("every episode classified")
        })
        .collect()
}

fn hex_digest(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// `eval`: pair each episode with its outcome file, compute metrics,
/// write the results JSON, and print the AS/CAS table. Episodes without
/// outcomes are skipped with a warning; more than 10% skipped is a
/// failure.
pub fn cmd_eval(dataset: &Path, outcomes: &Path, out: &Path) -> Result<(), CliError> {
    let (_, episodes) = read_dataset_dir(dataset).map_err(runtime)?;
    let mut pairs = Vec::new();
    let mut skipped = 0usize;
    for episode in &episodes {
        let path = outcomes.join(format!("{}.json", episode.episode_id));
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(_) => {
                eprintln!(
                    "warning: no outcome for episode {}; skipped",
                    episode.episode_id
                );
                skipped += 1;
                continue;
            }
        };
        let stored: StoredOutcome = serde_json::from_str(&text)
            .map_err(|e| runtime(format!("outcome {}: {e}", path.display())))?;
        pairs.push((episode, stored));
    }
    if pairs.is_empty() {
        return Err(CliError::Runtime("0 episodes evaluated".to_string()));
    }
    let metrics: Vec<_> = pairs
        .iter()
        .map(|(episode, stored)| episode_metrics(episode, &stored.outcome))
        .collect();
    let agg = aggregate(&metrics).map_err(runtime)?;
    let method = pairs[0].1.variant.clone();

    let results = ResultsFile {
        per_episode: metrics,
        aggregate: agg.clone(),
    };
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(runtime)?;
        }
    }
    let mut text = serde_json::to_string_pretty(&results).expect("results serialization");
    text.push('\n');
    atomic_write(out, text.as_bytes()).map_err(runtime)?;

    print!("{}", render_table(&[(method, agg)]));
    println!(
        "evaluated {} episodes ({} skipped); results written to {}",
        pairs.len(),
        skipped,
        out.display()
    );

    if skipped * 10 > episodes.len() {
        return Err(CliError::Runtime(format!(
            "{skipped} of {} episodes had no outcome (more than 10%)",
            episodes.len()
        )));
    }
    Ok(())
}
