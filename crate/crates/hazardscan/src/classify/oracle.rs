//! Rule-oracle backend: re-derives labels by applying catalog rules to
//! the scene graph, with optional seeded label noise.
//!
//! The oracle walks the same relation-extraction and rule-matching path
//! a real backend's prompt content comes from, so end-to-end runs
//! exercise extraction, matching, and metrics rather than reading the
//! ground truth back.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Classification, ClassificationOutcome, ClassifyError};
use crate::catalog::{match_rules, Category, HazardCatalog};
use crate::graph::{extract_relation_strings, NodeId};
use crate::scenario::Episode;

/// Deterministic rule-based classifier.
pub struct OracleBackend {
    catalog: HazardCatalog,
    noise_p: f64,
    noise_seed: u64,
}

impl OracleBackend {
    pub fn new(catalog: HazardCatalog, noise_p: f64, noise_seed: u64) -> Self {
        OracleBackend {
            catalog,
            noise_p,
            noise_seed,
        }
    }

    /// Labels every relation string of the episode's scene. With
    /// probability `noise_p` per object (seeded by `(noise_seed,
    /// episode_id, node_id)`, so draws are independent of iteration
    /// order) the label is corrupted: non-normal labels flip to normal
    /// and normal labels flip to a uniformly random non-normal category.
    /// This keeps the expected detection rate at exactly `1 - noise_p`.
    pub fn classify_episode(
        &self,
        episode: &Episode,
    ) -> Result<ClassificationOutcome, ClassifyError> {
        let relations = extract_relation_strings(&episode.scene)?;
        let mut classifications = Vec::with_capacity(relations.len());
        for relation in &relations {
            let true_label = match match_rules(&self.catalog, &episode.scene, relation.object_node_id)
            {
                Some((_, category)) => category,
                None => Category::Normal,
            };
            let label = self.apply_noise(true_label, &episode.episode_id, relation.object_node_id);
            classifications.push(Classification {
                object_node_id: relation.object_node_id,
                label,
                raw_fragment: String::new(),
            });
        }
        Ok(ClassificationOutcome {
            classifications,
            parse_failures: 0,
            raw_exchange: Vec::new(),
        })
    }

    fn apply_noise(&self, label: Category, episode_id: &str, node: NodeId) -> Category {
        if self.noise_p <= 0.0 {
            return label;
        }
        let seed = splitmix64(self.noise_seed ^ fnv1a64(episode_id.as_bytes()) ^ splitmix64(node.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if rng.gen::<f64>() >= self.noise_p {
            return label;
        }
        match label {
            Category::Normal => {
                const NON_NORMAL: [Category; 3] = [
                    Category::Unsafe,
                    Category::Unsanitary,
                    Category::UnsafeForChildren,
                ];
                NON_NORMAL[rng.gen_range(0..NON_NORMAL.len())]
            }
            _ => Category::Normal,
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
