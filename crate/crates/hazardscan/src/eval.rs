//! Preference-aware report filtering, AS/CAS metrics, and aggregation.
//!
//! Per-episode scores are exact rationals (AS has denominator |A|, CAS
//! has denominator |A_ctx|); aggregation converts to floats only when
//! computing means and standard errors.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::catalog::{Category, HazardClass};
use crate::classify::{Classification, ClassificationOutcome};
use crate::graph::NodeId;
use crate::scenario::{Episode, UserPreferences};

/// Exact per-episode score.
pub type Score = Ratio<i64>;

/// What the agent tells the user about one episode: non-normal
/// classifications that survive preference filtering, plus the ones the
/// filter removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Report {
    pub episode_id: String,
    pub reported: Vec<Classification>,
    pub suppressed: Vec<Classification>,
}

/// Per-episode evaluation results. `as_value` is defined only when the
/// episode has anomalies; `cas_value` only when it has in-context
/// anomalies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub episode_id: String,
    #[serde(serialize_with = "score_as_f64")]
    pub as_value: Option<Score>,
    #[serde(serialize_with = "score_as_f64")]
    pub cas_value: Option<Score>,
    pub per_class_tp: BTreeMap<HazardClass, u32>,
    pub per_class_occurrences: BTreeMap<HazardClass, u32>,
    pub false_positives: u32,
    pub false_negatives: u32,
    pub parse_failures: u32,
}

fn score_as_f64<S: Serializer>(score: &Option<Score>, serializer: S) -> Result<S::Ok, S::Error> {
    match score {
        Some(s) => serializer.serialize_some(&ratio_to_f64(*s)),
        None => serializer.serialize_none(),
    }
}

pub fn ratio_to_f64(score: Score) -> f64 {
    *score.numer() as f64 / *score.denom() as f64
}

/// Dataset-level means with standard errors, plus pooled per-class true
/// positive rates.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMetrics {
    pub mean_as: f64,
    pub se_as: f64,
    pub n_as: usize,
    pub mean_cas: f64,
    pub se_cas: f64,
    pub n_cas: usize,
    pub per_class_tpr: BTreeMap<HazardClass, f64>,
}

impl Serialize for AggregateMetrics {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(7))?;
        map.serialize_entry("mean_as", &self.mean_as)?;
        map.serialize_entry("se_as", &self.se_as)?;
        map.serialize_entry("n_as", &self.n_as)?;
        map.serialize_entry("mean_cas", &self.mean_cas)?;
        map.serialize_entry("se_cas", &self.se_cas)?;
        map.serialize_entry("n_cas", &self.n_cas)?;
        map.serialize_entry("per_class_tpr", &self.per_class_tpr)?;
        map.end()
    }
}

/// The results file written by evaluation runs.
#[derive(Debug, Clone, Serialize)]
pub struct ResultsFile {
    pub per_episode: Vec<EpisodeMetrics>,
    pub aggregate: AggregateMetrics,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no episode has a defined {0} value; nothing to aggregate")]
    AllUndefined(&'static str),
}

/// Applies user preferences to a classification outcome: normal labels
/// are dropped, and child-only hazards are suppressed when no children
/// are present.
pub fn filter_reports(
    episode_id: &str,
    outcome: &ClassificationOutcome,
    prefs: UserPreferences,
) -> Report {
    let mut reported = Vec::new();
    let mut suppressed = Vec::new();
    for classification in &outcome.classifications {
        match classification.label {
            Category::Normal => {}
            Category::UnsafeForChildren if !prefs.children_present => {
                suppressed.push(classification.clone());
            }
            _ => reported.push(classification.clone()),
        }
    }
    Report {
        episode_id: episode_id.to_string(),
        reported,
        suppressed,
    }
}

/// Anomaly Success: the fraction of ground-truth anomalies carrying any
/// non-normal label before preference filtering. Undefined when the
/// episode has no anomalies.
pub fn anomaly_success(outcome: &ClassificationOutcome, episode: &Episode) -> Option<Score> {
    let total = episode.anomalies.len();
    if total == 0 {
        return None;
    }
    let found = episode
        .anomalies
        .iter()
        .filter(|a| is_found(outcome, a.object_node_id))
        .count();
    Some(Ratio::new(found as i64, total as i64))
}

fn is_found(outcome: &ClassificationOutcome, node: NodeId) -> bool {
    outcome
        .classifications
        .iter()
        .any(|c| c.object_node_id == node && c.label != Category::Normal)
}

/// Conditioned Anomaly Success: correct context-appropriate reports
/// minus incorrect reports, over the in-context anomaly count.
///
/// A report is correct when its object is an in-context anomaly and the
/// label matches the ground-truth category exactly; it is incorrect when
/// its object is not an in-context anomaly at all. A wrong-category
/// report of an in-context anomaly is a miss: neither correct nor
/// incorrect. The score is not clamped and may be negative; it is
/// undefined when no anomalies are in context.
pub fn conditioned_anomaly_success(report: &Report, episode: &Episode) -> Option<Score> {
    let in_context: BTreeMap<NodeId, Category> = episode
        .anomalies
        .iter()
        .filter(|a| {
            episode.preferences.children_present || a.category != Category::UnsafeForChildren
        })
        .map(|a| (a.object_node_id, a.category))
        .collect();
    if in_context.is_empty() {
        return None;
    }
    let mut correct = 0i64;
    let mut incorrect = 0i64;
    for classification in &report.reported {
        match in_context.get(&classification.object_node_id) {
            Some(truth) if *truth == classification.label => correct += 1,
            Some(_) => {}
            None => incorrect += 1,
        }
    }
    Some(Ratio::new(correct - incorrect, in_context.len() as i64))
}

/// Computes the full per-episode metric record.
pub fn episode_metrics(episode: &Episode, outcome: &ClassificationOutcome) -> EpisodeMetrics {
    let report = filter_reports(&episode.episode_id, outcome, episode.preferences);
    let as_value = anomaly_success(outcome, episode);
    let cas_value = conditioned_anomaly_success(&report, episode);

    let mut per_class_tp = BTreeMap::new();
    let mut per_class_occurrences = BTreeMap::new();
    let mut found_total = 0u32;
    for anomaly in &episode.anomalies {
        *per_class_occurrences.entry(anomaly.hazard_class).or_insert(0) += 1;
        if is_found(outcome, anomaly.object_node_id) {
            *per_class_tp.entry(anomaly.hazard_class).or_insert(0) += 1;
            found_total += 1;
        }
    }
    let ground_truth: BTreeSet<NodeId> = episode
        .anomalies
        .iter()
        .map(|a| a.object_node_id)
        .collect();
    let false_positives = report
        .reported
        .iter()
        .filter(|c| !ground_truth.contains(&c.object_node_id))
        .count() as u32;
    let false_negatives = episode.anomalies.len() as u32 - found_total;

    EpisodeMetrics {
        episode_id: episode.episode_id.clone(),
        as_value,
        cas_value,
        per_class_tp,
        per_class_occurrences,
        false_positives,
        false_negatives,
        parse_failures: outcome.parse_failures,
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, variance.sqrt() / (n as f64).sqrt())
}

/// Aggregates per-episode metrics: means and standard errors over
/// defined values (se = sample standard deviation / sqrt(n)), plus
/// pooled per-class true positive rates.
pub fn aggregate(metrics: &[EpisodeMetrics]) -> Result<AggregateMetrics, EvalError> {
    let as_values: Vec<f64> = metrics
        .iter()
        .filter_map(|m| m.as_value)
        .map(ratio_to_f64)
        .collect();
    let cas_values: Vec<f64> = metrics
        .iter()
        .filter_map(|m| m.cas_value)
        .map(ratio_to_f64)
        .collect();
    if as_values.is_empty() {
        return Err(EvalError::AllUndefined("AS"));
    }
    if cas_values.is_empty() {
        return Err(EvalError::AllUndefined("CAS"));
    }
    let (mean_as, se_as) = mean_and_se(&as_values);
    let (mean_cas, se_cas) = mean_and_se(&cas_values);

    let mut tp: BTreeMap<HazardClass, u32> = BTreeMap::new();
    let mut occurrences: BTreeMap<HazardClass, u32> = BTreeMap::new();
    for m in metrics {
        for (class, count) in &m.per_class_tp {
            *tp.entry(*class).or_insert(0) += count;
        }
        for (class, count) in &m.per_class_occurrences {
            *occurrences.entry(*class).or_insert(0) += count;
        }
    }
    let per_class_tpr = occurrences
        .iter()
        .map(|(class, occ)| {
            let hits = tp.get(class).copied().unwrap_or(0);
            (*class, f64::from(hits) / f64::from(*occ))
        })
        .collect();

    Ok(AggregateMetrics {
        mean_as,
        se_as,
        n_as: as_values.len(),
        mean_cas,
        se_cas,
        n_cas: cas_values.len(),
        per_class_tpr,
    })
}

/// Renders the results table: one row per method, AS and CAS as
/// percentages.
pub fn render_table(rows: &[(String, AggregateMetrics)]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<28}{:>8}{:>8}\n", "Method", "AS", "CAS"));
    for (method, metrics) in rows {
        out.push_str(&format!(
            "{:<28}{:>8.1}{:>8.1}\n",
            method,
            metrics.mean_as * 100.0,
            metrics.mean_cas * 100.0
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SceneGraph;
    use crate::scenario::GroundTruthAnomaly;

    fn classification(node: u64, label: Category) -> Classification {
        Classification {
            object_node_id: NodeId(node),
            label,
            raw_fragment: String::new(),
        }
    }

    fn outcome(labels: &[(u64, Category)]) -> ClassificationOutcome {
        ClassificationOutcome {
            classifications: labels
                .iter()
                .map(|(node, label)| classification(*node, *label))
                .collect(),
            parse_failures: 0,
            raw_exchange: Vec::new(),
        }
    }

    fn episode(anomalies: &[(u64, HazardClass)], children_present: bool) -> Episode {
        Episode {
            episode_id: "ep-eval-test".to_string(),
            base_scene_id: "test".to_string(),
            seed: 0,
            preferences: UserPreferences { children_present },
            scene: SceneGraph::new(Vec::new(), Vec::new()).unwrap(),
            anomalies: anomalies
                .iter()
                .map(|(node, class)| GroundTruthAnomaly {
                    object_node_id: NodeId(*node),
                    hazard_class: *class,
                    category: class.category(),
                })
                .collect(),
        }
    }

    #[test]
    fn filter_suppresses_child_hazards_without_children() {
        let outcome = outcome(&[
            (1, Category::UnsafeForChildren),
            (2, Category::Unsafe),
            (3, Category::Normal),
        ]);
        let report = filter_reports(
            "ep",
            &outcome,
            UserPreferences {
                children_present: false,
            },
        );
        assert_eq!(report.reported, vec![classification(2, Category::Unsafe)]);
        assert_eq!(
            report.suppressed,
            vec![classification(1, Category::UnsafeForChildren)]
        );
    }

    #[test]
    fn filter_keeps_child_hazards_with_children() {
        let outcome = outcome(&[(1, Category::UnsafeForChildren), (2, Category::Unsafe)]);
        let report = filter_reports(
            "ep",
            &outcome,
            UserPreferences {
                children_present: true,
            },
        );
        assert_eq!(report.reported.len(), 2);
        assert!(report.suppressed.is_empty());
    }

    #[test]
    fn all_normal_outcome_reports_nothing() {
        let outcome = outcome(&[(1, Category::Normal), (2, Category::Normal)]);
        let report = filter_reports(
            "ep",
            &outcome,
            UserPreferences {
                children_present: true,
            },
        );
        assert!(report.reported.is_empty());
        assert!(report.suppressed.is_empty());
    }

    #[test]
    fn anomaly_success_counts_detections() {
        let episode = episode(
            &[
                (1, HazardClass::Spills),
                (2, HazardClass::StoveOn),
                (3, HazardClass::ExpiredProduce),
            ],
            true,
        );
        // Two anomalies detected (one with the wrong category still
        // counts as found), one labeled normal.
        let outcome = outcome(&[
            (1, Category::Unsafe),
            (2, Category::Unsanitary),
            (3, Category::Normal),
        ]);
        assert_eq!(
            anomaly_success(&outcome, &episode),
            Some(Ratio::new(2, 3))
        );
    }

    #[test]
    fn anomaly_success_is_undefined_without_anomalies() {
        let episode = episode(&[], true);
        let outcome = outcome(&[(1, Category::Normal)]);
        assert_eq!(anomaly_success(&outcome, &episode), None);
    }

    #[test]
    fn cas_counts_correct_minus_incorrect() {
        let episode = episode(
            &[
                (1, HazardClass::Spills),
                (2, HazardClass::StoveOn),
                (3, HazardClass::ExpiredProduce),
            ],
            true,
        );
        // Two correct reports, one false positive on node 9.
        let outcome = outcome(&[
            (1, Category::Unsafe),
            (2, Category::Unsafe),
            (9, Category::Unsanitary),
        ]);
        let report = filter_reports("ep", &outcome, episode.preferences);
        assert_eq!(
            conditioned_anomaly_success(&report, &episode),
            Some(Ratio::new(1, 3))
        );
    }

    #[test]
    fn wrong_category_is_a_miss_not_a_penalty() {
        let episode = episode(&[(1, HazardClass::Spills), (2, HazardClass::StoveOn)], true);
        let outcome = outcome(&[(1, Category::Unsanitary), (2, Category::Unsafe)]);
        let report = filter_reports("ep", &outcome, episode.preferences);
        assert_eq!(
            conditioned_anomaly_success(&report, &episode),
            Some(Ratio::new(1, 2))
        );
    }

    #[test]
    fn cas_is_undefined_when_context_is_empty() {
        let episode = episode(&[(1, HazardClass::ChokingHazard)], false);
        let outcome = outcome(&[(1, Category::UnsafeForChildren)]);
        let report = filter_reports("ep", &outcome, episode.preferences);
        assert_eq!(conditioned_anomaly_success(&report, &episode), None);
    }

    #[test]
    fn cas_can_go_negative() {
        let episode = episode(&[(1, HazardClass::Spills)], true);
        let outcome = outcome(&[
            (7, Category::Unsafe),
            (8, Category::Unsafe),
            (9, Category::Unsafe),
        ]);
        let report = filter_reports("ep", &outcome, episode.preferences);
        assert_eq!(
            conditioned_anomaly_success(&report, &episode),
            Some(Ratio::new(-3, 1))
        );
    }

    #[test]
    fn adding_a_correct_report_never_decreases_cas() {
        let episode = episode(&[(1, HazardClass::Spills), (2, HazardClass::StoveOn)], true);
        let without = filter_reports(
            "ep",
            &outcome(&[(1, Category::Unsafe)]),
            episode.preferences,
        );
        let with = filter_reports(
            "ep",
            &outcome(&[(1, Category::Unsafe), (2, Category::Unsafe)]),
            episode.preferences,
        );
        let before = conditioned_anomaly_success(&without, &episode).unwrap();
        let after = conditioned_anomaly_success(&with, &episode).unwrap();
        assert!(after >= before);
    }

    #[test]
    fn adding_a_false_positive_never_increases_cas() {
        let episode = episode(&[(1, HazardClass::Spills)], true);
        let without = filter_reports(
            "ep",
            &outcome(&[(1, Category::Unsafe)]),
            episode.preferences,
        );
        let with = filter_reports(
            "ep",
            &outcome(&[(1, Category::Unsafe), (9, Category::Unsafe)]),
            episode.preferences,
        );
        let before = conditioned_anomaly_success(&without, &episode).unwrap();
        let after = conditioned_anomaly_success(&with, &episode).unwrap();
        assert!(after <= before);
    }

    #[test]
    fn aggregate_two_points_matches_closed_form() {
        let episode_a = episode(&[(1, HazardClass::Spills)], true);
        let m1 = episode_metrics(&episode_a, &outcome(&[(1, Category::Unsafe)]));
        let episode_b = episode(&[(1, HazardClass::Spills), (2, HazardClass::StoveOn)], true);
        let m2 = episode_metrics(&episode_b, &outcome(&[(1, Category::Unsafe)]));
        let agg = aggregate(&[m1, m2]).unwrap();
        assert_eq!(agg.mean_as, 0.75);
        assert!((agg.se_as - 0.25).abs() < 1e-12);
        assert_eq!(agg.n_as, 2);
    }

    #[test]
    fn identical_values_have_zero_se() {
        let ep = episode(&[(1, HazardClass::Spills)], true);
        let m = episode_metrics(&ep, &outcome(&[(1, Category::Unsafe)]));
        let agg = aggregate(&[m.clone(), m.clone(), m]).unwrap();
        assert_eq!(agg.se_as, 0.0);
        assert_eq!(agg.mean_as, 1.0);
    }

    #[test]
    fn all_undefined_is_an_error() {
        let ep = episode(&[], true);
        let m = episode_metrics(&ep, &outcome(&[]));
        assert!(matches!(
            aggregate(&[m]),
            Err(EvalError::AllUndefined("AS"))
        ));
    }

    #[test]
    fn per_class_tpr_pools_across_episodes() {
        let ep1 = episode(&[(1, HazardClass::Spills)], true);
        let m1 = episode_metrics(&ep1, &outcome(&[(1, Category::Unsafe)]));
        let ep2 = episode(&[(1, HazardClass::Spills)], true);
        let m2 = episode_metrics(&ep2, &outcome(&[(1, Category::Normal)]));
        let agg = aggregate(&[m1, m2]).unwrap();
        assert_eq!(agg.per_class_tpr[&HazardClass::Spills], 0.5);
    }

    #[test]
    fn table_renders_percentages() {
        let ep = episode(&[(1, HazardClass::Spills)], true);
        let m = episode_metrics(&ep, &outcome(&[(1, Category::Unsafe)]));
        let agg = aggregate(&[m]).unwrap();
        let table = render_table(&[("cot-sg-c (oracle)".to_string(), agg)]);
        assert!(table.contains("Method"));
        assert!(table.contains("100.0"));
    }
}
