//! Seeded procedural generation of benchmark episodes.
//!
//! An episode is one unit of benchmarking: a hazard-free base scene
//! extended with 0-5 injected anomalies, a user-preference flag, and the
//! seed that fully determines it. Datasets are directories of episode
//! files plus a manifest.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{
    apply_placement, candidate_anomalies, match_rules, CatalogError, Category, HazardCatalog,
    HazardClass,
};
use crate::graph::{parse_scene_graph, GraphError, NodeId, SceneGraph};

/// Per-episode context the agent must respect when reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserPreferences {
    pub children_present: bool,
}

/// One injected anomaly, recorded as ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthAnomaly {
    pub object_node_id: NodeId,
    pub hazard_class: HazardClass,
    pub category: Category,
}

/// A benchmark episode: scene, ground truth, preferences, and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub base_scene_id: String,
    pub seed: u64,
    pub preferences: UserPreferences,
    pub scene: SceneGraph,
    pub anomalies: Vec<GroundTruthAnomaly>,
}

/// A named hazard-free scene used as the starting point for episodes.
#[derive(Debug, Clone)]
pub struct BaseScene {
    pub id: String,
    pub graph: SceneGraph,
}

/// Manifest written next to episode files: enough to identify and replay
/// the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub master_seed: u64,
    pub episode_ids: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Maximum number of anomalies per episode.
pub const MAX_ANOMALIES: usize = 5;

/// Errors raised during episode generation or (de)serialization.
#[derive(Debug, Error)]
pub enum GenError {
    #[error("base scene \"{scene_id}\" is not hazard-free: node {node} matches {class}")]
    BaseSceneNotClean {
        scene_id: String,
        node: NodeId,
        class: HazardClass,
    },
    #[error("requested {requested} anomalies but only {available} instantiations exist")]
    NotEnoughCandidates { requested: usize, available: usize },
    #[error("episode count must be at least 1")]
    EmptyDataset,
    #[error("no base scenes provided")]
    NoBaseScenes,
    #[error("episode document does not match the schema: {0}")]
    Schema(String),
    #[error("episode invariant violated: {0}")]
    InvariantViolation(String),
    #[error("episode {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<GenError>,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Golden-ratio multiplier used to split a master seed into per-episode
/// seeds: `seed_i = master_seed XOR (i * 0x9E3779B97F4A7C15)` with
/// wrapping 64-bit arithmetic.
pub const SEED_SPLIT_MULTIPLIER: u64 = 0x9E37_79B9_7F4A_7C15;

/// The per-episode seed for episode `index` of a dataset.
pub fn episode_seed(master_seed: u64, index: u64) -> u64 {
    master_seed ^ index.wrapping_mul(SEED_SPLIT_MULTIPLIER)
}

/// Generates one episode from a hazard-free base scene. Fully
/// determined by `(catalog, base scene, seed)`.
///
/// Draws the anomaly count k uniformly from 0..=5, then k distinct
/// instantiations uniformly without replacement from the scene's
/// candidate pool, then the children-present flag with probability 0.5.
pub fn generate_episode(
    catalog: &HazardCatalog,
    base: &BaseScene,
    seed: u64,
) -> Result<Episode, GenError> {
    for node in base.graph.nodes() {
        if let Some((class, _)) = match_rules(catalog, &base.graph, node.id) {
            return Err(GenError::BaseSceneNotClean {
                scene_id: base.id.clone(),
                node: node.id,
                class,
            });
        }
    }
    let candidates = candidate_anomalies(catalog, &base.graph);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(0..=MAX_ANOMALIES);
    if k > candidates.len() {
        return Err(GenError::NotEnoughCandidates {
            requested: k,
            available: candidates.len(),
        });
    }
    let mut chosen = rand::seq::index::sample(&mut rng, candidates.len(), k).into_vec();
    chosen.sort_unstable();
    let mut scene = base.graph.clone();
    let mut anomalies = Vec::with_capacity(k);
    for idx in chosen {
        let candidate = &candidates[idx];
        let (mutated, node_id) = apply_placement(catalog, &scene, candidate)?;
        scene = mutated;
        anomalies.push(GroundTruthAnomaly {
            object_node_id: node_id,
            hazard_class: candidate.hazard_class,
            category: candidate.category(),
        });
    }
    let children_present = rng.gen_bool(0.5);
    let episode = Episode {
        episode_id: format!("ep-{seed:016x}"),
        base_scene_id: base.id.clone(),
        seed,
        preferences: UserPreferences { children_present },
        scene,
        anomalies,
    };
    validate_ground_truth(catalog, &episode)?;
    Ok(episode)
}

/// Checks the generator/recognizer contract on a finished episode:
/// distinct anomaly nodes, each recognized by the catalog with the
/// recorded class.
fn validate_ground_truth(catalog: &HazardCatalog, episode: &Episode) -> Result<(), GenError> {
    let mut seen = BTreeSet::new();
    for anomaly in &episode.anomalies {
        if !seen.insert(anomaly.object_node_id) {
            return Err(GenError::InvariantViolation(format!(
                "node {} hosts more than one anomaly",
                anomaly.object_node_id
            )));
        }
        let recognized = match_rules(catalog, &episode.scene, anomaly.object_node_id);
        if recognized != Some((anomaly.hazard_class, anomaly.category)) {
            return Err(GenError::InvariantViolation(format!(
                "node {} recorded as {} but recognized as {:?}",
                anomaly.object_node_id, anomaly.hazard_class, recognized
            )));
        }
    }
    Ok(())
}

/// Generates `n` i.i.d. episodes. The base scene for each episode is
/// drawn uniformly from a stream seeded by `master_seed`; episode
/// internals use [`episode_seed`].
pub fn generate_dataset(
    catalog: &HazardCatalog,
    base_scenes: &[BaseScene],
    n: usize,
    master_seed: u64,
) -> Result<Vec<Episode>, GenError> {
    if n == 0 {
        return Err(GenError::EmptyDataset);
    }
    if base_scenes.is_empty() {
        return Err(GenError::NoBaseScenes);
    }
    let mut scene_rng = ChaCha8Rng::seed_from_u64(master_seed);
    let mut episodes = Vec::with_capacity(n);
    for index in 0..n {
        let scene_idx = scene_rng.gen_range(0..base_scenes.len());
        let seed = episode_seed(master_seed, index as u64);
        let episode =
            generate_episode(catalog, &base_scenes[scene_idx], seed).map_err(|e| {
                GenError::AtIndex {
                    index,
                    source: Box::new(e),
                }
            })?;
        episodes.push(episode);
    }
    Ok(episodes)
}

/// Serializes an episode to its JSON document form.
pub fn write_episode(episode: &Episode) -> String {
    let mut text =
        serde_json::to_string_pretty(episode).expect("episode serialization cannot fail");
    text.push('\n');
    text
}

/// Parses and validates an episode document.
pub fn read_episode(document: &str) -> Result<Episode, GenError> {
    let episode: Episode =
        serde_json::from_str(document).map_err(|e| GenError::Schema(e.to_string()))?;
    if episode.anomalies.len() > MAX_ANOMALIES {
        return Err(GenError::InvariantViolation(format!(
            "episode has {} anomalies; at most {} allowed",
            episode.anomalies.len(),
            MAX_ANOMALIES
        )));
    }
    let mut seen = BTreeSet::new();
    for anomaly in &episode.anomalies {
        if episode.scene.node(anomaly.object_node_id).is_none() {
            return Err(GenError::InvariantViolation(format!(
                "anomaly references missing node {}",
                anomaly.object_node_id
            )));
        }
        if !seen.insert(anomaly.object_node_id) {
            return Err(GenError::InvariantViolation(format!(
                "node {} hosts more than one anomaly",
                anomaly.object_node_id
            )));
        }
        if anomaly.category != anomaly.hazard_class.category() {
            return Err(GenError::InvariantViolation(format!(
                "anomaly at node {} records category \"{}\" but {} belongs to \"{}\"",
                anomaly.object_node_id,
                anomaly.category,
                anomaly.hazard_class,
                anomaly.hazard_class.category()
            )));
        }
    }
    Ok(episode)
}

/// Writes a dataset directory: one JSON file per episode plus
/// `manifest.json`.
pub fn write_dataset_dir(
    dir: &Path,
    episodes: &[Episode],
    master_seed: u64,
) -> Result<(), GenError> {
    fs::create_dir_all(dir)?;
    for episode in episodes {
        let path = dir.join(format!("{}.json", episode.episode_id));
        atomic_write(&path, write_episode(episode).as_bytes())?;
    }
    let manifest = DatasetManifest {
        master_seed,
        episode_ids: episodes.iter().map(|e| e.episode_id.clone()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    text.push('\n');
    atomic_write(&dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(())
}

/// Reads a dataset directory back in manifest order.
pub fn read_dataset_dir(dir: &Path) -> Result<(DatasetManifest, Vec<Episode>), GenError> {
    let manifest_text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&manifest_text).map_err(|e| GenError::Schema(e.to_string()))?;
    let mut episodes = Vec::with_capacity(manifest.episode_ids.len());
    for id in &manifest.episode_ids {
        let text = fs::read_to_string(dir.join(format!("{id}.json")))?;
        episodes.push(read_episode(&text)?);
    }
    Ok((manifest, episodes))
}

/// Write-temp-then-rename so concurrent readers never see partial files.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// The seven base scenes shipped with the crate.
pub fn shipped_base_scenes() -> Vec<BaseScene> {
    const SCENES: [(&str, &str); 7] = [
        ("scene01", include_str!("../data/scenes/scene01.json")),
        ("scene02", include_str!("../data/scenes/scene02.json")),
        ("scene03", include_str!("../data/scenes/scene03.json")),
        ("scene04", include_str!("../data/scenes/scene04.json")),
        ("scene05", include_str!("../data/scenes/scene05.json")),
        ("scene06", include_str!("../data/scenes/scene06.json")),
        ("scene07", include_str!("../data/scenes/scene07.json")),
    ];
    SCENES
        .iter()
        .map(|(id, text)| BaseScene {
            id: id.to_string(),
            graph: parse_scene_graph(text).expect("shipped scene is valid"),
        })
        .collect()
}
