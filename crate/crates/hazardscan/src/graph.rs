//! Typed scene-graph data model.
//!
//! A scene is a graph whose nodes are rooms, objects, and surface-capable
//! objects, and whose edges are spatial relations (`ON`, `INSIDE`, `FACING`,
//! `CLOSE`). Graphs are immutable after construction and canonically ordered
//! (nodes by id, edges by `(from, relation, to)`), so equal graphs serialize
//! to identical bytes.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a node within one scene graph.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What a node is: a plain object, a room, or an object that other
/// objects can sit on top of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Object,
    Room,
    SurfaceCapable,
}

impl NodeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Object => "object",
            NodeKind::Room => "room",
            NodeKind::SurfaceCapable => "surface-capable object",
        }
    }

    fn from_token(token: &str) -> Result<Self, GraphError> {
        match token {
            "object" => Ok(NodeKind::Object),
            "room" => Ok(NodeKind::Room),
            "surface-capable object" => Ok(NodeKind::SurfaceCapable),
            other => Err(GraphError::UnknownKind(other.to_string())),
        }
    }
}

/// A boolean condition carried by a node.
///
/// Variants are declared in alphabetical token order so the derived `Ord`
/// matches the alphabetical rendering used in relation strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateFlag {
    Broken,
    Closed,
    Off,
    On,
    Open,
}

impl StateFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            StateFlag::Broken => "BROKEN",
            StateFlag::Closed => "CLOSED",
            StateFlag::Off => "OFF",
            StateFlag::On => "ON",
            StateFlag::Open => "OPEN",
        }
    }

    /// `OFF` and `CLOSED` are resting states: they are stored but never
    /// rendered into relation strings.
    pub fn is_default(&self) -> bool {
        matches!(self, StateFlag::Off | StateFlag::Closed)
    }

    /// The state this one cannot coexist with on a single node, if any.
    pub fn conflicting(&self) -> Option<StateFlag> {
        match self {
            StateFlag::On => Some(StateFlag::Off),
            StateFlag::Off => Some(StateFlag::On),
            StateFlag::Open => Some(StateFlag::Closed),
            StateFlag::Closed => Some(StateFlag::Open),
            StateFlag::Broken => None,
        }
    }

    pub fn from_token(token: &str) -> Result<Self, GraphError> {
        match token {
            "BROKEN" => Ok(StateFlag::Broken),
            "CLOSED" => Ok(StateFlag::Closed),
            "OFF" => Ok(StateFlag::Off),
            "ON" => Ok(StateFlag::On),
            "OPEN" => Ok(StateFlag::Open),
            other => Err(GraphError::UnknownState(other.to_string())),
        }
    }
}

/// Spatial relation carried by an edge. Closed set; anything else is a
/// parse error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationType {
    On,
    Inside,
    Facing,
    Close,
}

impl RelationType {
    pub fn as_str(&self) -> &'static str {
        match self {
            RelationType::On => "ON",
            RelationType::Inside => "INSIDE",
            RelationType::Facing => "FACING",
            RelationType::Close => "CLOSE",
        }
    }

    pub fn from_token(token: &str) -> Result<Self, GraphError> {
        match token {
            "ON" => Ok(RelationType::On),
            "INSIDE" => Ok(RelationType::Inside),
            "FACING" => Ok(RelationType::Facing),
            "CLOSE" => Ok(RelationType::Close),
            other => Err(GraphError::UnknownRelation(other.to_string())),
        }
    }
}

/// One node of a scene graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub class_name: String,
    pub kind: NodeKind,
    pub states: BTreeSet<StateFlag>,
}

impl Node {
    pub fn new(id: u64, class_name: &str, kind: NodeKind) -> Self {
        Node {
            id: NodeId(id),
            class_name: class_name.to_string(),
            kind,
            states: BTreeSet::new(),
        }
    }

    pub fn with_states<I: IntoIterator<Item = StateFlag>>(mut self, states: I) -> Self {
        self.states = states.into_iter().collect();
        self
    }

    /// True when the node carries at least one state that is not a
    /// resting state (`OFF`/`CLOSED`).
    pub fn has_notable_state(&self) -> bool {
        self.states.iter().any(|s| !s.is_default())
    }
}

/// A directed relation between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub from: NodeId,
    pub relation: RelationType,
    pub to: NodeId,
}

impl Edge {
    pub fn new(from: u64, relation: RelationType, to: u64) -> Self {
        Edge {
            from: NodeId(from),
            relation,
            to: NodeId(to),
        }
    }
}

/// Textual rendering of one object's placement and state, e.g.
/// `"apple INSIDE kitchen ON counter"` or `"stove(ON) INSIDE kitchen"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationString {
    pub object_node_id: NodeId,
    pub text: String,
}

/// Errors raised while parsing, validating, or walking a scene graph.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed JSON at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("document does not match the scene-graph schema: {0}")]
    Shape(String),
    #[error("unknown relation token \"{0}\"")]
    UnknownRelation(String),
    #[error("unknown state token \"{0}\"")]
    UnknownState(String),
    #[error("unknown node kind \"{0}\"")]
    UnknownKind(String),
    #[error("invalid class name \"{0}\": must be non-empty lowercase without whitespace")]
    InvalidClassName(String),
    #[error("duplicate node id {0}")]
    DuplicateNodeId(NodeId),
    #[error("edge references missing node id {0}")]
    DanglingEdge(NodeId),
    #[error("edge from node {0} to itself")]
    SelfLoop(NodeId),
    #[error("room node {0} has an outgoing {1} edge")]
    RoomPlacement(NodeId, &'static str),
    #[error("node {0} has more than one outgoing {1} edge")]
    MultiParent(NodeId, &'static str),
    #[error("node {0} carries conflicting states {1} and {2}")]
    StateConflict(NodeId, &'static str, &'static str),
    #[error("INSIDE cycle through nodes {}", format_ids(.0))]
    InsideCycle(Vec<NodeId>),
    #[error("no node with id {0}")]
    UnknownNode(NodeId),
}

fn format_ids(ids: &[NodeId]) -> String {
    let parts: Vec<String> = ids.iter().map(|id| id.to_string()).collect();
    parts.join(", ")
}

/// An immutable household scene: rooms, objects, and the relations
/// between them. The single source of scene truth for generation,
/// prompting, and classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

/// Maximum number of INSIDE hops followed when resolving a node's room.
const MAX_INSIDE_DEPTH: usize = 8;

impl SceneGraph {
    /// Builds a graph from parts, validating every structural invariant
    /// and canonicalizing order (nodes by id, edges by `(from, relation,
    /// to)`).
    pub fn new(mut nodes: Vec<Node>, mut edges: Vec<Edge>) -> Result<Self, GraphError> {
        nodes.sort_by_key(|n| n.id);
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(GraphError::DuplicateNodeId(pair[0].id));
            }
        }
        for node in &nodes {
            if !valid_class_name(&node.class_name) {
                return Err(GraphError::InvalidClassName(node.class_name.clone()));
            }
            for state in &node.states {
                if let Some(conflict) = state.conflicting() {
                    if node.states.contains(&conflict) {
                        return Err(GraphError::StateConflict(
                            node.id,
                            state.as_str(),
                            conflict.as_str(),
                        ));
                    }
                }
            }
        }
        edges.sort();
        let graph = SceneGraph { nodes, edges };
        for edge in &graph.edges {
            if edge.from == edge.to {
                return Err(GraphError::SelfLoop(edge.from));
            }
            for endpoint in [edge.from, edge.to] {
                if graph.node(endpoint).is_none() {
                    return Err(GraphError::DanglingEdge(endpoint));
                }
            }
        }
        for node in &graph.nodes {
            let on_count = graph.out_edges(node.id, RelationType::On).count();
            let inside_count = graph.out_edges(node.id, RelationType::Inside).count();
            if node.kind == NodeKind::Room {
                if on_count > 0 {
                    return Err(GraphError::RoomPlacement(node.id, "ON"));
                }
                if inside_count > 0 {
                    return Err(GraphError::RoomPlacement(node.id, "INSIDE"));
                }
            } else {
                if on_count > 1 {
                    return Err(GraphError::MultiParent(node.id, "ON"));
                }
                if inside_count > 1 {
                    return Err(GraphError::MultiParent(node.id, "INSIDE"));
                }
            }
        }
        Ok(graph)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Looks a node up by id. Nodes are kept sorted, so this is a binary
    /// search.
    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|idx| &self.nodes[idx])
    }

    /// Largest node id present, if any.
    pub fn max_node_id(&self) -> Option<NodeId> {
        self.nodes.last().map(|n| n.id)
    }

    fn out_edges(&self, from: NodeId, relation: RelationType) -> impl Iterator<Item = &Edge> {
        self.edges
            .iter()
            .filter(move |e| e.from == from && e.relation == relation)
    }

    /// The unique node this one sits on top of, if any.
    pub fn on_target(&self, id: NodeId) -> Option<NodeId> {
        self.out_edges(id, RelationType::On).next().map(|e| e.to)
    }

    /// The unique node this one is directly inside, if any.
    pub fn inside_target(&self, id: NodeId) -> Option<NodeId> {
        self.out_edges(id, RelationType::Inside)
            .next()
            .map(|e| e.to)
    }
}

fn valid_class_name(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(|c| c.is_whitespace() || c.is_uppercase())
}

#[derive(Serialize, Deserialize)]
struct RawNode {
    id: u64,
    class_name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    states: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawEdge {
    from: u64,
    relation: String,
    to: u64,
}

#[derive(Serialize, Deserialize)]
struct RawDocument {
    nodes: Vec<RawNode>,
    edges: Vec<RawEdge>,
}

/// Parses a scene-graph JSON document and validates every invariant.
pub fn parse_scene_graph(document: &str) -> Result<SceneGraph, GraphError> {
    let raw: RawDocument = serde_json::from_str(document).map_err(|e| json_error(document, e))?;
    scene_graph_from_raw(raw)
}

impl Serialize for SceneGraph {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = RawDocument {
            nodes: self
                .nodes
                .iter()
                .map(|n| RawNode {
                    id: n.id.0,
                    class_name: n.class_name.clone(),
                    kind: n.kind.as_str().to_string(),
                    states: n.states.iter().map(|s| s.as_str().to_string()).collect(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| RawEdge {
                    from: e.from.0,
                    relation: e.relation.as_str().to_string(),
                    to: e.to.0,
                })
                .collect(),
        };
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SceneGraph {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawDocument::deserialize(deserializer)?;
        scene_graph_from_raw(raw).map_err(serde::de::Error::custom)
    }
}

fn scene_graph_from_raw(raw: RawDocument) -> Result<SceneGraph, GraphError> {
    let mut nodes = Vec::with_capacity(raw.nodes.len());
    for rn in raw.nodes {
        let kind = NodeKind::from_token(&rn.kind)?;
        let mut states = BTreeSet::new();
        for token in &rn.states {
            states.insert(StateFlag::from_token(token)?);
        }
        nodes.push(Node {
            id: NodeId(rn.id),
            class_name: rn.class_name,
            kind,
            states,
        });
    }
    let mut edges = Vec::with_capacity(raw.edges.len());
    for re in raw.edges {
        edges.push(Edge {
            from: NodeId(re.from),
            relation: RelationType::from_token(&re.relation)?,
            to: NodeId(re.to),
        });
    }
    SceneGraph::new(nodes, edges)
}

fn json_error(document: &str, err: serde_json::Error) -> GraphError {
    if err.is_syntax() || err.is_eof() {
        GraphError::Syntax {
            offset: byte_offset(document, err.line(), err.column()),
            message: err.to_string(),
        }
    } else {
        GraphError::Shape(err.to_string())
    }
}

/// Converts a 1-based (line, column) position into a byte offset.
fn byte_offset(document: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in document.split('\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1);
        }
        offset += l.len() + 1;
    }
    document.len()
}

/// Serializes a graph to canonical JSON: node order by id, edge order by
/// `(from, relation, to)`, empty state lists omitted. Equal graphs
/// produce identical bytes.
pub fn serialize_scene_graph(graph: &SceneGraph) -> String {
    let raw = RawDocument {
        nodes: graph
            .nodes
            .iter()
            .map(|n| RawNode {
                id: n.id.0,
                class_name: n.class_name.clone(),
                kind: n.kind.as_str().to_string(),
                states: n.states.iter().map(|s| s.as_str().to_string()).collect(),
            })
            .collect(),
        edges: graph
            .edges
            .iter()
            .map(|e| RawEdge {
                from: e.from.0,
                relation: e.relation.as_str().to_string(),
                to: e.to.0,
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("scene graph serialization cannot fail")
}

/// Resolves the room a node is in by following its INSIDE chain, up to
/// [`MAX_INSIDE_DEPTH`] hops. Returns `None` when no room is reachable.
pub fn room_of(graph: &SceneGraph, id: NodeId) -> Result<Option<NodeId>, GraphError> {
    if graph.node(id).is_none() {
        return Err(GraphError::UnknownNode(id));
    }
    let mut visited = vec![id];
    let mut current = id;
    for _ in 0..MAX_INSIDE_DEPTH {
        let Some(next) = graph.inside_target(current) else {
            return Ok(None);
        };
        if visited.contains(&next) {
            visited.push(next);
            return Err(GraphError::InsideCycle(visited));
        }
        let node = graph.node(next).expect("validated edge endpoint");
        if node.kind == NodeKind::Room {
            return Ok(Some(next));
        }
        visited.push(next);
        current = next;
    }
    Ok(None)
}

/// Extracts the object-relation strings that describe a scene.
///
/// Object-kind nodes with a resolvable room always emit one string; room
/// and surface-capable nodes emit one only when they carry a state other
/// than `OFF`/`CLOSED` (an open fridge matters, a closed one does not).
/// Output is sorted by object node id and is a pure function of the
/// graph.
pub fn extract_relation_strings(graph: &SceneGraph) -> Result<Vec<RelationString>, GraphError> {
    let mut out = Vec::new();
    for node in graph.nodes() {
        let Some(room_id) = room_of(graph, node.id)? else {
            continue;
        };
        let emit = match node.kind {
            NodeKind::Object => true,
            NodeKind::Room | NodeKind::SurfaceCapable => node.has_notable_state(),
        };
        if !emit {
            continue;
        }
        let room = graph.node(room_id).expect("room_of returns existing node");
        let mut text = node.class_name.clone();
        if node.has_notable_state() {
            let states: Vec<&str> = node.states.iter().map(|s| s.as_str()).collect();
            text.push('(');
            text.push_str(&states.join(","));
            text.push(')');
        }
        text.push_str(" INSIDE ");
        text.push_str(&room.class_name);
        if let Some(surface_id) = graph.on_target(node.id) {
            let surface = graph.node(surface_id).expect("validated edge endpoint");
            text.push_str(" ON ");
            text.push_str(&surface.class_name);
        }
        out.push(RelationString {
            object_node_id: node.id,
            text,
        });
    }
    Ok(out)
}
