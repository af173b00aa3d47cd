//! Shared helpers for integration tests: seeded random scene graphs.

use std::collections::BTreeSet;

use hazardscan::graph::{Edge, Node, NodeKind, RelationType, SceneGraph, StateFlag};
use rand::Rng;

const ROOM_CLASSES: [&str; 5] = ["kitchen", "livingroom", "bedroom", "bathroom", "study"];
const SURFACE_CLASSES: [&str; 5] = ["counter", "table", "floor", "shelf", "nightstand"];
const OBJECT_CLASSES: [&str; 8] = [
    "apple", "book", "knife", "mug", "box", "lamp", "towel", "plant",
];

/// Valid state sets (no ON/OFF or OPEN/CLOSED conflicts).
const STATE_SETS: [&[StateFlag]; 8] = [
    &[],
    &[StateFlag::On],
    &[StateFlag::Off],
    &[StateFlag::Open],
    &[StateFlag::Closed],
    &[StateFlag::Broken],
    &[StateFlag::On, StateFlag::Open],
    &[StateFlag::Broken, StateFlag::Off],
];

/// Builds a random valid scene graph: scattered ids, optional nesting,
/// optional floating containers, random states, and a few FACING/CLOSE
/// edges.
pub fn random_scene_graph<R: Rng>(rng: &mut R) -> SceneGraph {
    let n_rooms = rng.gen_range(1..=3usize);
    let n_surfaces = rng.gen_range(0..=4usize);
    let n_objects = rng.gen_range(0..=8usize);

    let mut ids = BTreeSet::new();
    while ids.len() < n_rooms + n_surfaces + n_objects {
        ids.insert(rng.gen_range(0..500u64));
    }
    let ids: Vec<u64> = ids.into_iter().collect();
    let (room_ids, rest) = ids.split_at(n_rooms);
    let (surface_ids, object_ids) = rest.split_at(n_surfaces);

    let mut nodes = Vec::new();
    let mut edges = Vec::new();

    for &id in room_ids {
        nodes.push(Node::new(id, ROOM_CLASSES[rng.gen_range(0..ROOM_CLASSES.len())], NodeKind::Room));
    }
    for (i, &id) in surface_ids.iter().enumerate() {
        let class = SURFACE_CLASSES[rng.gen_range(0..SURFACE_CLASSES.len())];
        let states = STATE_SETS[rng.gen_range(0..STATE_SETS.len())];
        nodes.push(Node::new(id, class, NodeKind::SurfaceCapable).with_states(states.iter().copied()));
        // 70% inside a room, 15% nested in an earlier surface, 15% floating.
        let roll = rng.gen_range(0..100);
        if roll < 70 {
            edges.push(Edge::new(id, RelationType::Inside, room_ids[rng.gen_range(0..n_rooms)]));
        } else if roll < 85 && i > 0 {
            edges.push(Edge::new(id, RelationType::Inside, surface_ids[rng.gen_range(0..i)]));
        }
    }
    for &id in object_ids {
        let class = OBJECT_CLASSES[rng.gen_range(0..OBJECT_CLASSES.len())];
        let states = STATE_SETS[rng.gen_range(0..STATE_SETS.len())];
        nodes.push(Node::new(id, class, NodeKind::Object).with_states(states.iter().copied()));
        if n_surfaces > 0 && rng.gen_bool(0.6) {
            edges.push(Edge::new(id, RelationType::On, surface_ids[rng.gen_range(0..n_surfaces)]));
        }
        if rng.gen_bool(0.8) {
            // Inside a room or a surface-capable container.
            if n_surfaces > 0 && rng.gen_bool(0.3) {
                edges.push(Edge::new(id, RelationType::Inside, surface_ids[rng.gen_range(0..n_surfaces)]));
            } else {
                edges.push(Edge::new(id, RelationType::Inside, room_ids[rng.gen_range(0..n_rooms)]));
            }
        }
    }
    // Flavor relations, unconstrained beyond no self-loops.
    for _ in 0..rng.gen_range(0..3usize) {
        let a = ids[rng.gen_range(0..ids.len())];
        let b = ids[rng.gen_range(0..ids.len())];
        if a != b {
            let relation = if rng.gen_bool(0.5) {
                RelationType::Facing
            } else {
                RelationType::Close
            };
            edges.push(Edge::new(a, relation, b));
        }
    }

    SceneGraph::new(nodes, edges).expect("generated graph is valid")
}
