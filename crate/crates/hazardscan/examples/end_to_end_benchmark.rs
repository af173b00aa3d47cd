//! The full pipeline in one run: generate a dataset, classify it with
//! oracles of varying noise, and print the aggregate results table.
//!
//! Run with: cargo run -p hazardscan --example end_to_end_benchmark

use hazardscan::classify::{Backend, BackendConfig};
use hazardscan::eval::{aggregate, episode_metrics, render_table};
use hazardscan::prompt::PromptVariant;
use hazardscan::scenario::{generate_dataset, shipped_base_scenes};
use hazardscan::HazardCatalog;

fn main() {
    let catalog = HazardCatalog::shipped_default();
    let scenes = shipped_base_scenes();
    let episodes = generate_dataset(&catalog, &scenes, 200, 42).unwrap();
    println!("dataset: 200 episodes (seed 42)\n");

    let mut rows = Vec::new();
    for (label, noise_p) in [
        ("oracle, noise 0.0", 0.0),
        ("oracle, noise 0.1", 0.1),
        ("oracle, noise 0.2", 0.2),
    ] {
        let cfg = BackendConfig::oracle_with_noise(noise_p, 7);
        let backend = Backend::from_config(&cfg, &catalog).unwrap();
        let metrics: Vec<_> = episodes
            .iter()
            .map(|episode| {
                let outcome = backend
                    .classify_episode(episode, PromptVariant::CotSgC)
                    .unwrap();
                episode_metrics(episode, &outcome)
            })
            .collect();
        let agg = aggregate(&metrics).unwrap();
        println!(
            "{label}: AS {:.3} +/- {:.3} (n={}), CAS {:.3} +/- {:.3} (n={})",
            agg.mean_as, agg.se_as, agg.n_as, agg.mean_cas, agg.se_cas, agg.n_cas
        );
        rows.push((format!("cot-sg-c ({label})"), agg));
    }

    println!("\n{}", render_table(&rows));
    println!("a noise level of p keeps the expected detection rate at 1 - p");
}
