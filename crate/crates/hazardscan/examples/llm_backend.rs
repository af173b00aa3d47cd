//! Configure the chat-completion backend and, when a credential is
//! available, classify one generated episode end to end.
//!
//! The request wire format is a single user message:
//! `{"model": ..., "temperature": ..., "messages": [{"role": "user",
//! "content": ...}]}` with a bearer token from HAZARDSCAN_API_KEY.
//!
//! Run with:
//!   HAZARDSCAN_API_KEY=... cargo run -p hazardscan --example llm_backend
//!
//! Without the key the example prints the configuration and exits.

use hazardscan::classify::{Backend, BackendConfig, BackendKind, API_KEY_ENV};
use hazardscan::eval::{episode_metrics, ratio_to_f64};
use hazardscan::prompt::PromptVariant;
use hazardscan::scenario::{generate_episode, shipped_base_scenes};
use hazardscan::HazardCatalog;

fn main() {
    let cfg = BackendConfig {
        kind: BackendKind::Llm,
        endpoint: std::env::var("HAZARDSCAN_ENDPOINT")
            .unwrap_or_else(|_| "https://api.openai.com/v1/chat/completions".to_string()),
        model_name: std::env::var("HAZARDSCAN_MODEL").unwrap_or_else(|_| "gpt-4".to_string()),
        // A cheaper model is fine for the simplification stage.
        parse_model_name: std::env::var("HAZARDSCAN_PARSE_MODEL").ok(),
        temperature: 0.0,
        max_retries: 3,
        timeout_secs: 60,
        requests_per_minute: Some(30),
        noise_p: 0.0,
        noise_seed: 0,
    };
    println!(
        "backend config:\n{}\n",
        serde_json::to_string_pretty(&cfg).unwrap()
    );

    let catalog = HazardCatalog::shipped_default();
    let backend = match Backend::from_config(&cfg, &catalog) {
        Ok(backend) => backend,
        Err(err) => {
            println!("not running a live call: {err}");
            println!("set {API_KEY_ENV} (and optionally HAZARDSCAN_ENDPOINT / HAZARDSCAN_MODEL) to try it");
            return;
        }
    };

    let scenes = shipped_base_scenes();
    let episode = generate_episode(&catalog, &scenes[0], 2024).unwrap();
    println!(
        "classifying episode {} ({} anomalies) with {}...",
        episode.episode_id,
        episode.anomalies.len(),
        cfg.model_name
    );
    match backend.classify_episode(&episode, PromptVariant::CotSgC) {
        Ok(outcome) => {
            println!(
                "got {} classifications, {} parse failures",
                outcome.classifications.len(),
                outcome.parse_failures
            );
            for exchange in &outcome.raw_exchange {
                println!(
                    "\n--- {} response ---\n{}",
                    exchange.stage, exchange.response
                );
            }
            let metrics = episode_metrics(&episode, &outcome);
            println!(
                "\nAS  = {}",
                metrics
                    .as_value
                    .map_or("undefined".to_string(), |v| format!("{:.3}", ratio_to_f64(v)))
            );
            println!(
                "CAS = {}",
                metrics
                    .cas_value
                    .map_or("undefined".to_string(), |v| format!("{:.3}", ratio_to_f64(v)))
            );
        }
        Err(err) => println!("live call failed: {err}"),
    }
}
