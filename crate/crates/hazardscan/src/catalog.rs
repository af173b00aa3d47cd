//! Hazard taxonomy and the declarative rules that recognize or
//! instantiate each hazard class in a scene graph.
//!
//! A catalog is data: rules map (object class, placement, state)
//! patterns to one of 13 hazard classes grouped into three non-normal
//! categories. The same rules drive both anomaly injection during
//! episode generation and recognition during oracle classification.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    room_of, Edge, GraphError, Node, NodeId, NodeKind, RelationType, SceneGraph, StateFlag,
};

/// Classification label: one of the four categories every object
/// relation is sorted into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "normal")]
    Normal,
    #[serde(rename = "unsafe")]
    Unsafe,
    #[serde(rename = "unsanitary")]
    Unsanitary,
    #[serde(rename = "unsafe for children")]
    UnsafeForChildren,
}

impl Category {
    /// Canonical lowercase rendering used in prompts and reports.
    pub fn label(&self) -> &'static str {
        match self {
            Category::Normal => "normal",
            Category::Unsafe => "unsafe",
            Category::Unsanitary => "unsanitary",
            Category::UnsafeForChildren => "unsafe for children",
        }
    }

    pub const ALL: [Category; 4] = [
        Category::Normal,
        Category::Unsafe,
        Category::Unsanitary,
        Category::UnsafeForChildren,
    ];
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The 13 hazard classes of the benchmark taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HazardClass {
    Spills,
    TrippingHazard,
    BrokenItems,
    CandleOn,
    FrontDoorOpen,
    StoveOn,
    RefrigeratedFoodsOut,
    ExpiredProduce,
    FridgeFreezerOpen,
    ChokingHazard,
    SharpObjects,
    PoisonCleaningProducts,
    PoisonMedicationBeauty,
}

impl HazardClass {
    pub const ALL: [HazardClass; 13] = [
        HazardClass::Spills,
        HazardClass::TrippingHazard,
        HazardClass::BrokenItems,
        HazardClass::CandleOn,
        HazardClass::FrontDoorOpen,
        HazardClass::StoveOn,
        HazardClass::RefrigeratedFoodsOut,
        HazardClass::ExpiredProduce,
        HazardClass::FridgeFreezerOpen,
        HazardClass::ChokingHazard,
        HazardClass::SharpObjects,
        HazardClass::PoisonCleaningProducts,
        HazardClass::PoisonMedicationBeauty,
    ];

    /// The category each hazard class belongs to. Total and constant.
    pub fn category(&self) -> Category {
        match self {
            HazardClass::Spills
            | HazardClass::TrippingHazard
            | HazardClass::BrokenItems
            | HazardClass::CandleOn
            | HazardClass::FrontDoorOpen
            | HazardClass::StoveOn => Category::Unsafe,
            HazardClass::RefrigeratedFoodsOut
            | HazardClass::ExpiredProduce
            | HazardClass::FridgeFreezerOpen => Category::Unsanitary,
            HazardClass::ChokingHazard
            | HazardClass::SharpObjects
            | HazardClass::PoisonCleaningProducts
            | HazardClass::PoisonMedicationBeauty => Category::UnsafeForChildren,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            HazardClass::Spills => "Spills",
            HazardClass::TrippingHazard => "TrippingHazard",
            HazardClass::BrokenItems => "BrokenItems",
            HazardClass::CandleOn => "CandleOn",
            HazardClass::FrontDoorOpen => "FrontDoorOpen",
            HazardClass::StoveOn => "StoveOn",
            HazardClass::RefrigeratedFoodsOut => "RefrigeratedFoodsOut",
            HazardClass::ExpiredProduce => "ExpiredProduce",
            HazardClass::FridgeFreezerOpen => "FridgeFreezerOpen",
            HazardClass::ChokingHazard => "ChokingHazard",
            HazardClass::SharpObjects => "SharpObjects",
            HazardClass::PoisonCleaningProducts => "PoisonCleaningProducts",
            HazardClass::PoisonMedicationBeauty => "PoisonMedicationBeauty",
        }
    }

    fn from_token(token: &str) -> Result<Self, CatalogError> {
        HazardClass::ALL
            .iter()
            .find(|hc| hc.as_str() == token)
            .copied()
            .ok_or_else(|| CatalogError::UnknownHazardClass(token.to_string()))
    }
}

impl fmt::Display for HazardClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where an anomaly's object may sit for the hazard to exist.
///
/// `state_only` rules alter an existing node instead of placing a new
/// one; they may constrain the room but never the supporting surface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementPattern {
    pub surfaces: Option<BTreeSet<String>>,
    pub rooms: Option<BTreeSet<String>>,
    pub state_only: bool,
}

/// One declarative rule: objects of these classes, placed like this,
/// carrying these states, constitute the given hazard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnomalyRule {
    pub hazard_class: HazardClass,
    pub object_classes: BTreeSet<String>,
    pub placement: PlacementPattern,
    pub required_states: BTreeSet<StateFlag>,
}

/// A loaded, validated rule set covering all 13 hazard classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HazardCatalog {
    rules: Vec<AnomalyRule>,
}

/// Errors raised while loading or applying a catalog.
#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("document does not match the catalog schema: {0}")]
    Schema(String),
    #[error("unknown hazard class token \"{0}\"")]
    UnknownHazardClass(String),
    #[error("unknown state token \"{0}\"")]
    UnknownState(String),
    #[error("rule {0} has an empty object_classes list")]
    EmptyObjectClasses(usize),
    #[error("rule {0} is state_only but constrains surfaces")]
    StateOnlyWithSurfaces(usize),
    #[error("rule {0} is state_only but requires no states")]
    StateOnlyWithoutStates(usize),
    #[error("catalog does not cover hazard classes: {}", .0.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", "))]
    MissingClasses(Vec<HazardClass>),
    #[error("cannot apply instantiation: {0}")]
    Apply(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Serialize, Deserialize)]
struct RawPlacement {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    surfaces: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rooms: Option<Vec<String>>,
    #[serde(default)]
    state_only: bool,
}

#[derive(Serialize, Deserialize)]
struct RawRule {
    hazard_class: String,
    object_classes: Vec<String>,
    placement: RawPlacement,
    #[serde(default)]
    required_states: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawCatalog {
    rules: Vec<RawRule>,
}

/// Parses and validates a catalog JSON document. Every hazard class
/// must be covered by at least one rule.
pub fn load_catalog(document: &str) -> Result<HazardCatalog, CatalogError> {
    let raw: RawCatalog =
        serde_json::from_str(document).map_err(|e| CatalogError::Schema(e.to_string()))?;
    let mut rules = Vec::with_capacity(raw.rules.len());
    for (idx, rr) in raw.rules.into_iter().enumerate() {
        let hazard_class = HazardClass::from_token(&rr.hazard_class)?;
        if rr.object_classes.is_empty() {
            return Err(CatalogError::EmptyObjectClasses(idx));
        }
        let mut required_states = BTreeSet::new();
        for token in &rr.required_states {
            let state = StateFlag::from_token(token)
                .map_err(|_| CatalogError::UnknownState(token.clone()))?;
            required_states.insert(state);
        }
        let placement = PlacementPattern {
            surfaces: rr.placement.surfaces.map(|v| v.into_iter().collect()),
            rooms: rr.placement.rooms.map(|v| v.into_iter().collect()),
            state_only: rr.placement.state_only,
        };
        if placement.state_only {
            if placement.surfaces.is_some() {
                return Err(CatalogError::StateOnlyWithSurfaces(idx));
            }
            if required_states.is_empty() {
                return Err(CatalogError::StateOnlyWithoutStates(idx));
            }
        }
        rules.push(AnomalyRule {
            hazard_class,
            object_classes: rr.object_classes.into_iter().collect(),
            placement,
            required_states,
        });
    }
    let covered: BTreeSet<HazardClass> = rules.iter().map(|r| r.hazard_class).collect();
    let missing: Vec<HazardClass> = HazardClass::ALL
        .iter()
        .filter(|hc| !covered.contains(hc))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(CatalogError::MissingClasses(missing));
    }
    Ok(HazardCatalog { rules })
}

impl HazardCatalog {
    pub fn rules(&self) -> &[AnomalyRule] {
        &self.rules
    }

    /// The catalog shipped with the crate, embedded at build time.
    pub fn shipped_default() -> HazardCatalog {
        load_catalog(SHIPPED_CATALOG_JSON).expect("shipped catalog is valid")
    }

    /// Hazard classes that only matter when children are present.
    pub fn child_only_classes(&self) -> BTreeSet<HazardClass> {
        HazardClass::ALL
            .iter()
            .filter(|hc| hc.category() == Category::UnsafeForChildren)
            .copied()
            .collect()
    }
}

/// JSON source of the default catalog.
pub const SHIPPED_CATALOG_JSON: &str = include_str!("../data/catalog.json");

fn node_room_class(graph: &SceneGraph, id: NodeId) -> Option<&str> {
    // Unresolvable rooms (including INSIDE cycles) simply fail the room
    // constraint; recognition never errors.
    let room_id = room_of(graph, id).ok().flatten()?;
    graph.node(room_id).map(|n| n.class_name.as_str())
}

fn rule_matches(rule: &AnomalyRule, graph: &SceneGraph, node: &Node) -> bool {
    if !rule.object_classes.contains(&node.class_name) {
        return false;
    }
    if !rule.required_states.is_subset(&node.states) {
        return false;
    }
    if let Some(rooms) = &rule.placement.rooms {
        match node_room_class(graph, node.id) {
            Some(room) if rooms.contains(room) => {}
            _ => return false,
        }
    }
    if rule.placement.state_only {
        return true;
    }
    if let Some(surfaces) = &rule.placement.surfaces {
        let Some(target) = graph.on_target(node.id) else {
            return false;
        };
        let Some(surface) = graph.node(target) else {
            return false;
        };
        if !surfaces.contains(&surface.class_name) {
            return false;
        }
    }
    true
}

/// Finds the hazard a node embodies, if any.
///
/// Precedence: state-only rules first, then placement rules, each in
/// catalog order; the first match wins, so recognition is a function.
pub fn match_rules(
    catalog: &HazardCatalog,
    graph: &SceneGraph,
    node_id: NodeId,
) -> Option<(HazardClass, Category)> {
    let node = graph.node(node_id)?;
    let state_rules = catalog.rules.iter().filter(|r| r.placement.state_only);
    let placement_rules = catalog.rules.iter().filter(|r| !r.placement.state_only);
    for rule in state_rules.chain(placement_rules) {
        if rule_matches(rule, graph, node) {
            return Some((rule.hazard_class, rule.hazard_class.category()));
        }
    }
    None
}

/// One concrete way to inject a hazard into a particular scene: a rule,
/// the object class to use, and the node acted on (the existing node to
/// mutate for state-only rules, otherwise the surface or room the new
/// object is placed on).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnomalyInstantiation {
    pub rule_index: usize,
    pub hazard_class: HazardClass,
    pub object_class: String,
    pub target: NodeId,
    pub state_only: bool,
}

impl AnomalyInstantiation {
    pub fn category(&self) -> Category {
        self.hazard_class.category()
    }
}

/// Enumerates every hazard instantiation possible in a scene, in
/// deterministic order (rule index, then target node id, then object
/// class).
pub fn candidate_anomalies(
    catalog: &HazardCatalog,
    graph: &SceneGraph,
) -> Vec<AnomalyInstantiation> {
    let mut out = Vec::new();
    for (rule_index, rule) in catalog.rules.iter().enumerate() {
        if rule.placement.state_only {
            for node in graph.nodes() {
                if !rule.object_classes.contains(&node.class_name) {
                    continue;
                }
                // Only nodes not already in the hazardous state can host
                // an injection.
                if rule.required_states.is_subset(&node.states) {
                    continue;
                }
                if let Some(rooms) = &rule.placement.rooms {
                    match node_room_class(graph, node.id) {
                        Some(room) if rooms.contains(room) => {}
                        _ => continue,
                    }
                }
                out.push(AnomalyInstantiation {
                    rule_index,
                    hazard_class: rule.hazard_class,
                    object_class: node.class_name.clone(),
                    target: node.id,
                    state_only: true,
                });
            }
        } else if let Some(surfaces) = &rule.placement.surfaces {
            for node in graph.nodes() {
                if !surfaces.contains(&node.class_name) {
                    continue;
                }
                let Some(room) = node_room_class(graph, node.id) else {
                    continue;
                };
                if let Some(rooms) = &rule.placement.rooms {
                    if !rooms.contains(room) {
                        continue;
                    }
                }
                for object_class in &rule.object_classes {
                    out.push(AnomalyInstantiation {
                        rule_index,
                        hazard_class: rule.hazard_class,
                        object_class: object_class.clone(),
                        target: node.id,
                        state_only: false,
                    });
                }
            }
        } else if let Some(rooms) = &rule.placement.rooms {
            // Room-only placement: the object goes directly inside the
            // room with no supporting surface.
            for node in graph.nodes() {
                if node.kind != NodeKind::Room || !rooms.contains(&node.class_name) {
                    continue;
                }
                for object_class in &rule.object_classes {
                    out.push(AnomalyInstantiation {
                        rule_index,
                        hazard_class: rule.hazard_class,
                        object_class: object_class.clone(),
                        target: node.id,
                        state_only: false,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| {
        (a.rule_index, a.target, &a.object_class).cmp(&(b.rule_index, b.target, &b.object_class))
    });
    out
}

/// Applies one instantiation to a scene, returning the mutated graph and
/// the id of the node that now embodies the hazard.
pub fn apply_placement(
    catalog: &HazardCatalog,
    graph: &SceneGraph,
    inst: &AnomalyInstantiation,
) -> Result<(SceneGraph, NodeId), CatalogError> {
    let rule = catalog
        .rules
        .get(inst.rule_index)
        .ok_or_else(|| CatalogError::Apply(format!("no rule at index {}", inst.rule_index)))?;
    let mut nodes: Vec<Node> = graph.nodes().to_vec();
    let mut edges: Vec<Edge> = graph.edges().to_vec();
    let hazard_node = if inst.state_only {
        let node = nodes
            .iter_mut()
            .find(|n| n.id == inst.target)
            .ok_or_else(|| CatalogError::Apply(format!("target node {} missing", inst.target)))?;
        for state in &rule.required_states {
            if let Some(conflict) = state.conflicting() {
                node.states.remove(&conflict);
            }
            node.states.insert(*state);
        }
        inst.target
    } else {
        let target_node = graph
            .node(inst.target)
            .ok_or_else(|| CatalogError::Apply(format!("target node {} missing", inst.target)))?;
        let new_id = NodeId(graph.max_node_id().map_or(1, |id| id.0 + 1));
        nodes.push(Node {
            id: new_id,
            class_name: inst.object_class.clone(),
            kind: NodeKind::Object,
            states: rule.required_states.clone(),
        });
        if target_node.kind == NodeKind::Room {
            edges.push(Edge {
                from: new_id,
                relation: RelationType::Inside,
                to: inst.target,
            });
        } else {
            let room = room_of(graph, inst.target)?.ok_or_else(|| {
                CatalogError::Apply(format!("surface {} has no resolvable room", inst.target))
            })?;
            edges.push(Edge {
                from: new_id,
                relation: RelationType::On,
                to: inst.target,
            });
            edges.push(Edge {
                from: new_id,
                relation: RelationType::Inside,
                to: room,
            });
        }
        new_id
    };
    let mutated = SceneGraph::new(nodes, edges)?;
    Ok((mutated, hazard_node))
}
