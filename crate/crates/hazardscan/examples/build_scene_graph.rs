//! Parse a scene-graph document, inspect it, and extract the
//! object-relation strings that feed the classifier.
//!
//! Run with: cargo run -p hazardscan --example build_scene_graph

use hazardscan::graph::{
    extract_relation_strings, parse_scene_graph, room_of, serialize_scene_graph,
};

fn main() {
    let document = r#"{
        "nodes": [
            {"id": 1, "class_name": "kitchen", "kind": "room"},
            {"id": 2, "class_name": "livingroom", "kind": "room"},
            {"id": 3, "class_name": "counter", "kind": "surface-capable object"},
            {"id": 4, "class_name": "floor", "kind": "surface-capable object"},
            {"id": 5, "class_name": "apple", "kind": "object"},
            {"id": 6, "class_name": "stove", "kind": "surface-capable object", "states": ["ON"]},
            {"id": 7, "class_name": "medication", "kind": "object"}
        ],
        "edges": [
            {"from": 3, "relation": "INSIDE", "to": 1},
            {"from": 4, "relation": "INSIDE", "to": 2},
            {"from": 5, "relation": "ON", "to": 3},
            {"from": 5, "relation": "INSIDE", "to": 1},
            {"from": 6, "relation": "INSIDE", "to": 1},
            {"from": 7, "relation": "ON", "to": 4},
            {"from": 7, "relation": "INSIDE", "to": 2}
        ]
    }"#;

    let scene = parse_scene_graph(document).expect("valid scene document");
    println!(
        "parsed a scene with {} nodes and {} edges",
        scene.nodes().len(),
        scene.edges().len()
    );

    for node in scene.nodes() {
        let room = room_of(&scene, node.id).unwrap();
        let room_name = room
            .and_then(|id| scene.node(id))
            .map(|n| n.class_name.as_str())
            .unwrap_or("-");
        println!(
            "  node {:>2}  {:<12} kind={:<24} room={}",
            node.id,
            node.class_name,
            node.kind.as_str(),
            room_name
        );
    }

    println!("\nobject-relation strings:");
    for relation in extract_relation_strings(&scene).unwrap() {
        println!("  [node {:>2}] {}", relation.object_node_id, relation.text);
    }

    println!("\ncanonical serialization (byte-stable for equal graphs):");
    println!("{}", serialize_scene_graph(&scene));
}
