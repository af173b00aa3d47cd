//! Classify episodes with the deterministic rule oracle, with and
//! without label noise.
//!
//! Run with: cargo run -p hazardscan --example classify_with_oracle

use hazardscan::classify::{Backend, BackendConfig};
use hazardscan::graph::extract_relation_strings;
use hazardscan::prompt::PromptVariant;
use hazardscan::scenario::{generate_episode, shipped_base_scenes};
use hazardscan::{Category, HazardCatalog};

fn main() {
    let catalog = HazardCatalog::shipped_default();
    let scenes = shipped_base_scenes();
    let episode = generate_episode(&catalog, &scenes[1], 12342).unwrap();

    println!(
        "episode {} on {}: {} injected anomalies",
        episode.episode_id,
        episode.base_scene_id,
        episode.anomalies.len()
    );
    for anomaly in &episode.anomalies {
        println!(
            "  truth: node {:>2} {} ({})",
            anomaly.object_node_id, anomaly.hazard_class, anomaly.category
        );
    }

    // Noise-free oracle: labels come from re-applying the catalog rules.
    let perfect = Backend::from_config(&BackendConfig::oracle(), &catalog).unwrap();
    let outcome = perfect
        .classify_episode(&episode, PromptVariant::CotSgC)
        .unwrap();
    let relations = extract_relation_strings(&episode.scene).unwrap();
    println!("\nnoise-free oracle labels:");
    for (relation, classification) in relations.iter().zip(&outcome.classifications) {
        let marker = if classification.label == Category::Normal {
            " "
        } else {
            "!"
        };
        println!("  {marker} {:<48} -> {}", relation.text, classification.label);
    }

    // The same episode under 30% label noise, fully determined by the
    // noise seed.
    let noisy = Backend::from_config(
        &BackendConfig::oracle_with_noise(0.3, 99),
        &catalog,
    )
    .unwrap();
    let noisy_outcome = noisy
        .classify_episode(&episode, PromptVariant::CotSgC)
        .unwrap();
    let flips = outcome
        .classifications
        .iter()
        .zip(&noisy_outcome.classifications)
        .filter(|(a, b)| a.label != b.label)
        .count();
    println!(
        "\nwith noise_p = 0.3 (seed 99): {flips} of {} labels corrupted",
        outcome.classifications.len()
    );
}
