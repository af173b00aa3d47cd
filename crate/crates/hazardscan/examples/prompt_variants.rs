//! Render every prompt variant for one scene, plus the stage-two
//! simplification prompt.
//!
//! Run with: cargo run -p hazardscan --example prompt_variants

use hazardscan::graph::{extract_relation_strings, parse_scene_graph};
use hazardscan::prompt::{build_parse_prompt, build_prompt, PromptVariant};

fn main() {
    let scene = parse_scene_graph(
        r#"{
            "nodes": [
                {"id": 1, "class_name": "kitchen", "kind": "room"},
                {"id": 2, "class_name": "counter", "kind": "surface-capable object"},
                {"id": 3, "class_name": "rawmeat", "kind": "object"},
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

    for variant in PromptVariant::ALL {
        let prompt = build_prompt(variant, &scene).unwrap();
        println!("================ {} ================", variant);
        println!("{}\n", prompt.text);
    }

    // The second stage turns a verbose response into one label per line.
    let relations = extract_relation_strings(&scene).unwrap();
    let verbose = "'rawmeat INSIDE kitchen ON counter': 'unsanitary' because raw meat spoils quickly\n\
                   'stove(ON) INSIDE kitchen': 'unsafe' since an unattended stove is a fire risk";
    let parse_prompt = build_parse_prompt(verbose, &relations);
    println!("================ simplification prompt ================");
    println!("{}", parse_prompt.text);
}
