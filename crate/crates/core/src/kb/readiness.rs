//! Readiness estimate that decides whether the next query widens or narrows.

use std::collections::{BTreeMap, BTreeSet};

use super::AdaptDecision;
use crate::model::{Milestone, UserProfile};

/// `0.4 * education + 0.3 * entity coverage + 0.3 * mean milestone progress`, in `[0, 1]`.
///
/// Coverage is the number of distinct entity types seen over the taxonomy size.
pub fn estimate_readiness(
    profile: &UserProfile,
    entity_types: &BTreeSet<String>,
    taxonomy_size: usize,
    milestones: &BTreeMap<String, Milestone>,
) -> f64 {
    let coverage = if taxonomy_size == 0 { 0.0 } else { (entity_types.len() as f64 / taxonomy_size as f64).min(1.0) };
    let progress = if milestones.is_empty() {
        0.0
    } else {
        milestones.values().map(|m| m.progress).sum::<f64>() / milestones.len() as f64
    };
    (0.4 * profile.education_level.score() + 0.3 * coverage + 0.3 * progress).clamp(0.0, 1.0)
}

/// Users below the threshold get broader queries; the rest get narrower ones.
pub fn choose_adaptation(est: f64, tau: f64) -> AdaptDecision {
    if est < tau {
        AdaptDecision::Expand
    } else {
        AdaptDecision::Refine
    }
}
