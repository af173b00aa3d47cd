//! Generate a seeded episode dataset and print its hazard statistics.
//!
//! Run with: cargo run -p hazardscan --example generate_dataset

use std::collections::BTreeMap;

use hazardscan::catalog::HazardClass;
use hazardscan::scenario::{generate_dataset, shipped_base_scenes};
use hazardscan::HazardCatalog;

fn main() {
    let catalog = HazardCatalog::shipped_default();
    let scenes = shipped_base_scenes();
    let master_seed = 3;
    let n = 1000;

    let episodes = generate_dataset(&catalog, &scenes, n, master_seed).unwrap();
    println!("generated {n} episodes with master seed {master_seed}\n");

    let mut histogram = [0usize; 6];
    let mut class_counts: BTreeMap<HazardClass, usize> = BTreeMap::new();
    let mut scene_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for episode in &episodes {
        histogram[episode.anomalies.len()] += 1;
        total += episode.anomalies.len();
        *scene_counts.entry(episode.base_scene_id.clone()).or_default() += 1;
        for anomaly in &episode.anomalies {
            *class_counts.entry(anomaly.hazard_class).or_default() += 1;
        }
    }

    println!("hazards per episode (k ~ uniform over 0..=5):");
    for (k, count) in histogram.iter().enumerate() {
        println!("  k={k}: {count:>4}  {}", "#".repeat(count / 5));
    }
    println!("  mean hazards/episode: {:.3}\n", total as f64 / n as f64);

    println!("occurrences per hazard class ({total} total):");
    for class in HazardClass::ALL {
        let count = class_counts.get(&class).copied().unwrap_or(0);
        println!("  {:<24} {:>4}", class.to_string(), count);
    }

    println!("\nepisodes per base scene:");
    for (scene, count) in &scene_counts {
        println!("  {scene}: {count}");
    }

    let sample = &episodes[3];
    println!(
        "\nsample episode {} (scene {}, children_present={}):",
        sample.episode_id, sample.base_scene_id, sample.preferences.children_present
    );
    for anomaly in &sample.anomalies {
        println!(
            "  node {:>2}  {:<24} {}",
            anomaly.object_node_id,
            anomaly.hazard_class.to_string(),
            anomaly.category
        );
    }
}
