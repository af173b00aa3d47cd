//! Classification backends and the deterministic response parser.
//!
//! Two backends implement the same contract: a remote chat-completion
//! service driven by the two-stage prompt flow, and a rule oracle that
//! re-derives labels from the catalog (with optional seeded noise) for
//! offline testing and calibration. Either way, the outcome covers every
//! relation string submitted: each one ends up classified or counted as
//! a parse failure.

mod llm;
mod oracle;

pub use llm::{remote_complete, LlmBackend, RateLimiter, RealSleeper, Sleeper};
pub use oracle::OracleBackend;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Category, HazardCatalog};
use crate::graph::{GraphError, NodeId, RelationString};
use crate::prompt::{PromptError, PromptVariant};
use crate::scenario::Episode;

/// Environment variable holding the bearer token for remote backends.
pub const API_KEY_ENV: &str = "HAZARDSCAN_API_KEY";

/// A per-object predicted label with the source text it came from
/// (empty for the oracle).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub object_node_id: NodeId,
    pub label: Category,
    #[serde(default)]
    pub raw_fragment: String,
}

/// Which classification engine to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Oracle,
    Llm,
}

/// Backend configuration, read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default = "default_endpoint")]
    pub endpoint: String,
    #[serde(default = "default_model")]
    pub model_name: String,
    /// Optional cheaper model for the stage-two simplification call.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_model_name: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Sliding-window rate limit for remote calls, when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_minute: Option<u32>,
    /// Oracle only: probability of corrupting each label.
    #[serde(default)]
    pub noise_p: f64,
    #[serde(default)]
    pub noise_seed: u64,
}

fn default_endpoint() -> String {
    "https://api.openai.com/v1/chat/completions".to_string()
}

fn default_model() -> String {
    "gpt-4".to_string()
}

fn default_max_retries() -> u32 {
    3
}

fn default_timeout_secs() -> u64 {
    60
}

impl BackendConfig {
    /// A zero-noise oracle configuration.
    pub fn oracle() -> BackendConfig {
        BackendConfig {
            kind: BackendKind::Oracle,
            endpoint: default_endpoint(),
            model_name: default_model(),
            parse_model_name: None,
            temperature: 0.0,
            max_retries: default_max_retries(),
            timeout_secs: default_timeout_secs(),
            requests_per_minute: None,
            noise_p: 0.0,
            noise_seed: 0,
        }
    }

    /// An oracle configuration with seeded label noise.
    pub fn oracle_with_noise(noise_p: f64, noise_seed: u64) -> BackendConfig {
        BackendConfig {
            noise_p,
            noise_seed,
            ..BackendConfig::oracle()
        }
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        if !(0.0..=1.0).contains(&self.noise_p) {
            return Err(ClassifyError::InvalidConfig(format!(
                "noise_p must be in [0, 1], got {}",
                self.noise_p
            )));
        }
        if self.temperature < 0.0 {
            return Err(ClassifyError::InvalidConfig(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// One request/response pair kept for transcript persistence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub stage: String,
    pub request: String,
    pub response: String,
}

/// The result of classifying one episode. Every relation string
/// submitted is accounted for: `classifications.len() + parse_failures`
/// equals the relation count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationOutcome {
    pub classifications: Vec<Classification>,
    pub parse_failures: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub raw_exchange: Vec<Exchange>,
}

/// Outcome file format written by batch runs: outcome plus enough
/// metadata to pair it with its episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredOutcome {
    pub episode_id: String,
    pub variant: String,
    #[serde(flatten)]
    pub outcome: ClassificationOutcome,
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("missing credential: set the {0} environment variable")]
    MissingCredential(&'static str),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
    #[error("credential rejected by backend (HTTP {status})")]
    CredentialRejected { status: u16 },
    #[error("backend request failed with HTTP {status}: {message}")]
    Backend { status: u16, message: String },
    #[error("backend request timed out after {seconds} s")]
    Timeout { seconds: u64 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A ready-to-use classification backend.
pub enum Backend {
    Oracle(OracleBackend),
    Llm(LlmBackend),
}

impl Backend {
    /// Builds a backend from configuration. The oracle needs the catalog
    /// to re-derive labels; remote backends need the credential from
    /// [`API_KEY_ENV`].
    pub fn from_config(
        cfg: &BackendConfig,
        catalog: &HazardCatalog,
    ) -> Result<Backend, ClassifyError> {
        cfg.validate()?;
        match cfg.kind {
            BackendKind::Oracle => Ok(Backend::Oracle(OracleBackend::new(
                catalog.clone(),
                cfg.noise_p,
                cfg.noise_seed,
            ))),
            BackendKind::Llm => Ok(Backend::Llm(LlmBackend::from_env(cfg.clone())?)),
        }
    }

    pub fn classify_episode(
        &self,
        episode: &Episode,
        variant: PromptVariant,
    ) -> Result<ClassificationOutcome, ClassifyError> {
        match self {
            Backend::Oracle(oracle) => oracle.classify_episode(episode),
            Backend::Llm(llm) => llm.classify_episode(episode, variant),
        }
    }
}

/// Classifies one episode with a freshly built backend. Batch callers
/// should build a [`Backend`] once and reuse it.
pub fn classify_episode(
    episode: &Episode,
    variant: PromptVariant,
    cfg: &BackendConfig,
    catalog: &HazardCatalog,
) -> Result<ClassificationOutcome, ClassifyError> {
    Backend::from_config(cfg, catalog)?.classify_episode(episode, variant)
}

/// Matches a simplified response against the submitted relation strings.
///
/// Lines that quote a relation string bind to it explicitly, so verbose,
/// reordered, or decorated responses still parse; otherwise non-empty
/// lines pair with relations positionally. A line yields a label only if
/// it contains exactly one of the four canonical labels as a maximal
/// word-boundary match ("unsafe for children" is consumed before
/// "unsafe"). Anything else counts as a parse failure for that relation;
/// failures are counted, never thrown.
pub fn parse_labels(
    simplified_response: &str,
    relations: &[RelationString],
) -> ClassificationOutcome {
    let lines: Vec<&str> = simplified_response
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();

    // Which relations does each line explicitly quote? Longer relation
    // texts are matched first and consumed, so a relation whose text is
    // a prefix of another's never steals its line.
    let mut order: Vec<usize> = (0..relations.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(relations[i].text.len()));
    let mut line_refs: Vec<(Vec<usize>, String)> = Vec::with_capacity(lines.len());
    let mut any_reference = false;
    for line in &lines {
        let mut residual = line.to_lowercase();
        let mut refs = Vec::new();
        for &rel_idx in &order {
            let needle = relations[rel_idx].text.to_lowercase();
            if let Some(pos) = residual.find(&needle) {
                residual.replace_range(pos..pos + needle.len(), " ");
                refs.push(rel_idx);
            }
        }
        if !refs.is_empty() {
            any_reference = true;
        }
        line_refs.push((refs, residual));
    }

    let mut classifications = Vec::new();
    let mut parse_failures = 0u32;
    for (rel_idx, relation) in relations.iter().enumerate() {
        let candidate = if any_reference {
            // Explicit mode: the first line that references this relation
            // and no other.
            line_refs
                .iter()
                .position(|(refs, _)| refs.as_slice() == [rel_idx])
                .map(|line_idx| (line_idx, line_refs[line_idx].1.clone()))
        } else {
            // Positional mode: the i-th non-empty line.
            lines.get(rel_idx).map(|l| (rel_idx, l.to_lowercase()))
        };
        let label = candidate.and_then(|(line_idx, text)| {
            single_label(&text).map(|label| (line_idx, label))
        });
        match label {
            Some((line_idx, label)) => classifications.push(Classification {
                object_node_id: relation.object_node_id,
                label,
                raw_fragment: lines[line_idx].to_string(),
            }),
            None => parse_failures += 1,
        }
    }

    ClassificationOutcome {
        classifications,
        parse_failures,
        raw_exchange: Vec::new(),
    }
}

/// Finds the unique canonical label in lowercased text, or `None` when
/// zero or several distinct labels appear.
fn single_label(lower: &str) -> Option<Category> {
    let mut text = lower.to_string();
    let mut found = Vec::new();
    // "unsafe for children" first so its "unsafe" bytes are consumed.
    for (needle, category) in [
        ("unsafe for children", Category::UnsafeForChildren),
        ("unsanitary", Category::Unsanitary),
        ("unsafe", Category::Unsafe),
        ("normal", Category::Normal),
    ] {
        if consume_word(&mut text, needle) {
            found.push(category);
        }
    }
    match found.as_slice() {
        [single] => Some(*single),
        _ => None,
    }
}

/// Blanks out every word-boundary occurrence of `needle`, reporting
/// whether at least one was found.
fn consume_word(text: &mut String, needle: &str) -> bool {
    let mut found = false;
    let mut search_from = 0;
    loop {
        let Some(pos) = text[search_from..].find(needle) else {
            return found;
        };
        let start = search_from + pos;
        let end = start + needle.len();
        let bytes = text.as_bytes();
        let boundary_before = start == 0 || !bytes[start - 1].is_ascii_alphanumeric();
        let boundary_after = end >= text.len() || !bytes[end].is_ascii_alphanumeric();
        if boundary_before && boundary_after {
            found = true;
            text.replace_range(start..end, &" ".repeat(needle.len()));
            search_from = end;
        } else {
            search_from = start + 1;
        }
        if search_from >= text.len() {
            return found;
        }
    }
}
