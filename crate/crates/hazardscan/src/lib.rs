//! hazardscan: a scene-graph hazard-detection toolkit and benchmark
//! harness for household safety monitoring.
//!
//! Home scenes are represented as typed graphs (objects, rooms, and the
//! relations between them). The library procedurally generates benchmark
//! episodes containing unsafe or unsanitary anomalies, renders scene
//! graphs into classification prompts for a chat-completion backend or a
//! deterministic rule oracle, parses responses, applies user-preference
//! report filtering, and scores detections with the AS/CAS metrics.
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! - **`build_scene_graph`** - parse a scene, inspect it, extract
//!   object-relation strings
//! - **`generate_dataset`** - seeded episode generation with hazard
//!   statistics
//! - **`prompt_variants`** - render all seven prompt variants for one
//!   scene
//! - **`classify_with_oracle`** - rule-oracle classification, with and
//!   without label noise
//! - **`evaluate_metrics`** - preference filtering and AS/CAS scoring
//!   for a single episode
//! - **`end_to_end_benchmark`** - the full generate/classify/evaluate
//!   pipeline with an aggregate results table
//! - **`llm_backend`** - configure a remote chat-completion backend
//!
//! ```bash
//! cargo run -p hazardscan --example build_scene_graph
//! cargo run -p hazardscan --example generate_dataset
//! cargo run -p hazardscan --example prompt_variants
//! cargo run -p hazardscan --example classify_with_oracle
//! cargo run -p hazardscan --example evaluate_metrics
//! cargo run -p hazardscan --example end_to_end_benchmark
//! cargo run -p hazardscan --example llm_backend
//! ```
//!
//! ## Command line
//!
//! The `hazardscan` binary wraps the same pipeline for batch runs:
//!
//! ```bash
//! hazardscan generate --count 1000 --seed 42 --out dataset/
//! hazardscan run --dataset dataset/ --variant cot-sg-c --backend oracle --out outcomes/
//! hazardscan eval --dataset dataset/ --outcomes outcomes/ --out results.json
//! ```
//!
//! ## Modules
//!
//! - [`graph`] - scene-graph model, JSON (de)serialization, relation
//!   string extraction
//! - [`catalog`] - the 13-class hazard taxonomy and its declarative
//!   recognition/injection rules
//! - [`scenario`] - seeded episode and dataset generation
//! - [`prompt`] - the seven prompt variants and the simplification
//!   prompt
//! - [`classify`] - oracle and chat-completion backends, response
//!   parsing
//! - [`eval`] - report filtering, AS/CAS metrics, aggregation
//! - [`cli`] - the `generate` / `run` / `eval` subcommands

pub mod catalog;
pub mod classify;
pub mod cli;
pub mod eval;
pub mod graph;
pub mod prompt;
pub mod scenario;

pub use catalog::{Category, HazardCatalog, HazardClass};
pub use classify::{Backend, BackendConfig, Classification, ClassificationOutcome};
pub use eval::{AggregateMetrics, EpisodeMetrics, Report};
pub use graph::{NodeId, RelationString, SceneGraph};
pub use prompt::{Prompt, PromptVariant};
pub use scenario::{BaseScene, Episode, GroundTruthAnomaly, UserPreferences};
