//! Prompt construction for the seven classification prompt variants and
//! the follow-up simplification prompt.
//!
//! Prompt text is deterministic down to the byte: golden files under
//! `fixtures/prompts/` pin every variant for a fixture scene. ASCII
//! straight quotes are used throughout. The em-dash/hyphen mix in the
//! chain-of-thought template is intentional and pinned by the goldens.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{
    extract_relation_strings, room_of, GraphError, NodeId, NodeKind, RelationString, SceneGraph,
};

/// The seven prompt construction strategies, in benchmark row order.
///
/// Naming: `E` = worked examples included, `Sg` = scene-graph relation
/// strings included, `C` = four-way categorization requested (otherwise
/// plain anomaly detection), `Cot` = examples carry reasoning chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PromptVariant {
    ObjectListEC,
    SceneDescriptionEC,
    SgNoC,
    ESgNoC,
    SgC,
    ESgC,
    CotSgC,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 7] = [
        PromptVariant::ObjectListEC,
        PromptVariant::SceneDescriptionEC,
        PromptVariant::SgNoC,
        PromptVariant::ESgNoC,
        PromptVariant::SgC,
        PromptVariant::ESgC,
        PromptVariant::CotSgC,
    ];

    /// Kebab-case name used on the command line and in file names.
    pub fn name(&self) -> &'static str {
        match self {
            PromptVariant::ObjectListEC => "object-list-ec",
            PromptVariant::SceneDescriptionEC => "scene-description-ec",
            PromptVariant::SgNoC => "sg-no-c",
            PromptVariant::ESgNoC => "e-sg-no-c",
            PromptVariant::SgC => "sg-c",
            PromptVariant::ESgC => "e-sg-c",
            PromptVariant::CotSgC => "cot-sg-c",
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptVariant {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptVariant::ALL
            .iter()
            .find(|v| v.name() == s)
            .copied()
            .ok_or_else(|| PromptError::UnknownVariant(s.to_string()))
    }
}

/// A fully rendered prompt plus the node order its content embeds, so
/// responses can be mapped back to scene nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    /// `None` for the stage-two simplification prompt.
    pub variant: Option<PromptVariant>,
    pub relation_order: Vec<NodeId>,
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("scene produces no content for variant {0}")]
    EmptyContent(PromptVariant),
    #[error("unknown prompt variant \"{0}\"; valid names: object-list-ec, scene-description-ec, sg-no-c, e-sg-no-c, sg-c, e-sg-c, cot-sg-c")]
    UnknownVariant(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

const CLASSIFY_RELATIONS: &str = "Classify the following object relations in a home into either 'normal', 'unsafe', 'unsanitary', or 'unsafe for children'";
const CLASSIFY_OBJECTS: &str = "Classify the following objects in a home into either 'normal', 'unsafe', 'unsanitary', or 'unsafe for children'";
const CLASSIFY_DESCRIPTION: &str = "Classify the objects in the following home description into either 'normal', 'unsafe', 'unsanitary', or 'unsafe for children'";
const DETECT_RELATIONS: &str = "List any object relations that are anomalous";

const EXAMPLE_RELATIONS: &str =
    "['medication INSIDE livingroom ON floor', 'rawmeat INSIDE kitchen ON counter']";
const EXAMPLE_ANSWER_COT: &str = "'medication INSIDE livingroom ON floor': 'unsafe for children' as medication is a poison hazard\n\n'rawmeat INSIDE kitchen ON counter': 'unsanitary' as rawmeat requires refrigeration and will go bad if left unrefrigerated.";
const EXAMPLE_ANSWER_PLAIN: &str =
    "'medication INSIDE livingroom ON floor': 'unsafe for children'\n\n'rawmeat INSIDE kitchen ON counter': 'unsanitary'";
const EXAMPLE_ANSWER_DETECT: &str =
    "'medication INSIDE livingroom ON floor'\n\n'rawmeat INSIDE kitchen ON counter'";
const EXAMPLE_OBJECTS: &str = "['medication', 'rawmeat']";
const EXAMPLE_ANSWER_OBJECTS: &str =
    "'medication': 'unsafe for children'\n\n'rawmeat': 'unsanitary'";
const EXAMPLE_DESCRIPTION: &str =
    "The livingroom contains a medication on the floor. The kitchen contains a rawmeat on the counter.";

/// Renders relation strings as the bracketed, single-quoted list the
/// prompts embed.
fn bracketed(items: &[String]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| format!("'{s}'")).collect();
    format!("[{}]", quoted.join(", "))
}

/// One Q/A exemplar pair followed by the live question. The exemplar
/// question uses a plain hyphen and the live question an en-dash,
/// matching the reference template this layout reproduces.
fn two_shot(instruction: &str, example_content: &str, example_answer: &str, content: &str) -> String {
    format!(
        "Q: {instruction} - {example_content}\n\nA: {example_answer}\n\nQ: {instruction} \u{2013} {content}\n\nA:"
    )
}

fn zero_shot(instruction: &str, content: &str) -> String {
    format!("Q: {instruction} \u{2013} {content}\n\nA:")
}

/// Builds the stage-one classification prompt for a scene.
pub fn build_prompt(variant: PromptVariant, scene: &SceneGraph) -> Result<Prompt, PromptError> {
    let relations = extract_relation_strings(scene)?;
    let relation_order: Vec<NodeId> = relations.iter().map(|r| r.object_node_id).collect();
    let relation_texts: Vec<String> = relations.iter().map(|r| r.text.clone()).collect();

    let text = match variant {
        PromptVariant::CotSgC => {
            require_content(variant, !relations.is_empty())?;
            two_shot(
                CLASSIFY_RELATIONS,
                EXAMPLE_RELATIONS,
                EXAMPLE_ANSWER_COT,
                &bracketed(&relation_texts),
            )
        }
        PromptVariant::ESgC => {
            require_content(variant, !relations.is_empty())?;
            two_shot(
                CLASSIFY_RELATIONS,
                EXAMPLE_RELATIONS,
                EXAMPLE_ANSWER_PLAIN,
                &bracketed(&relation_texts),
            )
        }
        PromptVariant::SgC => {
            require_content(variant, !relations.is_empty())?;
            zero_shot(CLASSIFY_RELATIONS, &bracketed(&relation_texts))
        }
        PromptVariant::SgNoC => {
            require_content(variant, !relations.is_empty())?;
            zero_shot(DETECT_RELATIONS, &bracketed(&relation_texts))
        }
        PromptVariant::ESgNoC => {
            require_content(variant, !relations.is_empty())?;
            two_shot(
                DETECT_RELATIONS,
                EXAMPLE_RELATIONS,
                EXAMPLE_ANSWER_DETECT,
                &bracketed(&relation_texts),
            )
        }
        PromptVariant::ObjectListEC => {
            let mut classes: Vec<String> = scene
                .nodes()
                .iter()
                .map(|n| n.class_name.clone())
                .collect();
            classes.sort();
            classes.dedup();
            require_content(variant, !classes.is_empty())?;
            two_shot(
                CLASSIFY_OBJECTS,
                EXAMPLE_OBJECTS,
                EXAMPLE_ANSWER_OBJECTS,
                &bracketed(&classes),
            )
        }
        PromptVariant::SceneDescriptionEC => {
            let description = describe_scene(scene, &relations)?;
            require_content(variant, !description.is_empty())?;
            two_shot(
                CLASSIFY_DESCRIPTION,
                EXAMPLE_DESCRIPTION,
                EXAMPLE_ANSWER_PLAIN,
                &description,
            )
        }
    };

    Ok(Prompt {
        text,
        variant: Some(variant),
        relation_order,
    })
}

fn require_content(variant: PromptVariant, ok: bool) -> Result<(), PromptError> {
    if ok {
        Ok(())
    } else {
        Err(PromptError::EmptyContent(variant))
    }
}

/// Templated prose rendering of a scene, one sentence per room in node
/// id order. Covers exactly the nodes that relation-string extraction
/// covers.
fn describe_scene(
    scene: &SceneGraph,
    relations: &[RelationString],
) -> Result<String, PromptError> {
    let mut sentences = Vec::new();
    for room in scene.nodes().iter().filter(|n| n.kind == NodeKind::Room) {
        let mut phrases = Vec::new();
        for rel in relations {
            let node = scene
                .node(rel.object_node_id)
                .expect("relation references existing node");
            if room_of(scene, node.id)? != Some(room.id) {
                continue;
            }
            let mut phrase = format!("{} {}", article(&node.class_name), node.class_name);
            if node.has_notable_state() {
                let states: Vec<String> = node
                    .states
                    .iter()
                    .map(|s| s.as_str().to_lowercase())
                    .collect();
                phrase.push_str(" that is ");
                phrase.push_str(&states.join(" and "));
            }
            if let Some(surface_id) = scene.on_target(node.id) {
                let surface = scene.node(surface_id).expect("validated edge endpoint");
                phrase.push_str(" on the ");
                phrase.push_str(&surface.class_name);
            }
            phrases.push(phrase);
        }
        if phrases.is_empty() {
            continue;
        }
        sentences.push(format!(
            "The {} contains {}.",
            room.class_name,
            join_phrases(&phrases)
        ));
    }
    Ok(sentences.join(" "))
}

fn article(noun: &str) -> &'static str {
    match noun.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

fn join_phrases(phrases: &[String]) -> String {
    match phrases.len() {
        1 => phrases[0].clone(),
        2 => format!("{} and {}", phrases[0], phrases[1]),
        _ => {
            let head = &phrases[..phrases.len() - 1];
            format!("{}, and {}", head.join(", "), phrases[phrases.len() - 1])
        }
    }
}

/// Builds the stage-two prompt that asks the model to simplify a verbose
/// response into one label per relation, in order.
pub fn build_parse_prompt(raw_response: &str, relations: &[RelationString]) -> Prompt {
    let mut text = String::from(
        "Simplify the previous response into a one word classification for each object relation. \
         For each object relation below, answer with exactly one of 'normal', 'unsafe', \
         'unsanitary', or 'unsafe for children', one per line, in the same order. \
         Do not add anything else.\n\nResponse:\n",
    );
    text.push_str(raw_response);
    text.push_str("\n\nObject relations:\n");
    for rel in relations {
        text.push('\'');
        text.push_str(&rel.text);
        text.push_str("'\n");
    }
    text.push_str("\nA:");
    Prompt {
        text,
        variant: None,
        relation_order: relations.iter().map(|r| r.object_node_id).collect(),
    }
}
