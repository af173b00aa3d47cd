//! Preference filtering and AS/CAS scoring for a single episode,
//! including the knife-on-the-counter case: a child hazard is suppressed
//! (and uncounted) when no children live in the home.
//!
//! Run with: cargo run -p hazardscan --example evaluate_metrics

use hazardscan::catalog::{Category, HazardClass};
use hazardscan::classify::{Classification, ClassificationOutcome};
use hazardscan::eval::{
    anomaly_success, conditioned_anomaly_success, episode_metrics, filter_reports, ratio_to_f64,
};
use hazardscan::graph::{parse_scene_graph, NodeId};
use hazardscan::scenario::{Episode, GroundTruthAnomaly, UserPreferences};

fn main() {
    // A kitchen with a knife on the counter (child hazard) and a stove
    // left on (hazard for everyone).
    let scene = parse_scene_graph(
        r#"{
            "nodes": [
                {"id": 1, "class_name": "kitchen", "kind": "room"},
                {"id": 2, "class_name": "counter", "kind": "surface-capable object"},
                {"id": 3, "class_name": "knife", "kind": "object"},
                {"id": 4, "class_name": "stove", "kind": "surface-capable object", "states": ["ON"]}
            ],
            "edges": [
                {"from": 2, "relation": "INSIDE", "to": 1},
                {"from": 3, "relation": "ON", "to": 2},
                {"from": 3, "relation": "INSIDE", "to": 1},
                {"from": 4, "relation": "INSIDE", "to": 1}
            ]
        }"#,
    )
    .unwrap();
    let anomalies = vec![
        GroundTruthAnomaly {
            object_node_id: NodeId(3),
            hazard_class: HazardClass::SharpObjects,
            category: Category::UnsafeForChildren,
        },
        GroundTruthAnomaly {
            object_node_id: NodeId(4),
            hazard_class: HazardClass::StoveOn,
            category: Category::Unsafe,
        },
    ];
    let outcome = ClassificationOutcome {
        classifications: vec![
            Classification {
                object_node_id: NodeId(3),
                label: Category::UnsafeForChildren,
                raw_fragment: String::new(),
            },
            Classification {
                object_node_id: NodeId(4),
                label: Category::Unsafe,
                raw_fragment: String::new(),
            },
        ],
        parse_failures: 0,
        raw_exchange: Vec::new(),
    };

    for children_present in [false, true] {
        let episode = Episode {
            episode_id: format!("ep-knife-children-{children_present}"),
            base_scene_id: "demo".to_string(),
            seed: 0,
            preferences: UserPreferences { children_present },
            scene: scene.clone(),
            anomalies: anomalies.clone(),
        };
        let report = filter_reports(&episode.episode_id, &outcome, episode.preferences);
        println!("children_present = {children_present}:");
        println!(
            "  reported:   {:?}",
            report
                .reported
                .iter()
                .map(|c| format!("node {} {}", c.object_node_id, c.label))
                .collect::<Vec<_>>()
        );
        println!(
            "  suppressed: {:?}",
            report
                .suppressed
                .iter()
                .map(|c| format!("node {} {}", c.object_node_id, c.label))
                .collect::<Vec<_>>()
        );
        let as_value = anomaly_success(&outcome, &episode);
        let cas_value = conditioned_anomaly_success(&report, &episode);
        println!(
            "  AS  = {}",
            as_value.map_or("undefined".to_string(), |v| format!(
                "{v} ({:.3})",
                ratio_to_f64(v)
            ))
        );
        println!(
            "  CAS = {}",
            cas_value.map_or("undefined".to_string(), |v| format!(
                "{v} ({:.3})",
                ratio_to_f64(v)
            ))
        );
        let metrics = episode_metrics(&episode, &outcome);
        println!(
            "  false positives = {}, false negatives = {}, parse failures = {}\n",
            metrics.false_positives, metrics.false_negatives, metrics.parse_failures
        );
    }
}
