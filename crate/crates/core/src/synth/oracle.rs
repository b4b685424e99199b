//! Brute-force evaluation of the four coverage metrics, written term by term
//! from their defining sums. Shares nothing with [`crate::coverage`] beyond
//! the error type and the box/membership parameters.

use std::collections::{BTreeMap, BTreeSet};

use crate::coverage::{ActorBoxSpec, ActorMembership, CoverageError};
use crate::ego_view::EgoDataset;
use crate::model::{EgoKey, Scenario, ScenarioCategory, Tag, TrackId};
use crate::tagging::TagCountMatrix;

pub fn tag_coverage(m: &TagCountMatrix, tags: &[Tag], categories: &[ScenarioCategory], n: u64) -> Result<f64, CoverageError> {
    if tags.is_empty() {
        return Err(CoverageError::EmptyTags);
    }
    if categories.is_empty() {
        return Err(CoverageError::EmptyCategories);
    }
    if n == 0 {
        return Err(CoverageError::ZeroN);
    }
    let mut sum = 0.0;
    for &t in tags {
        for &c in categories {
            let kappa = m
                .tags
                .iter()
                .position(|&x| x == t)
                .zip(m.categories.iter().position(|&x| x == c))
                .map(|(r, col)| m.counts[r * m.categories.len() + col])
                .unwrap_or(0);
            sum += kappa.min(n) as f64;
        }
    }
    Ok(sum / (n as f64 * tags.len() as f64 * categories.len() as f64))
}

/// `frames`: (ego, first, last) of every ego dataset.
pub fn time_coverage(frames: &[(EgoKey, u32, u32)], scenarios: &[Scenario], n: u64) -> Result<f64, CoverageError> {
    if n == 0 {
        return Err(CoverageError::ZeroN);
    }
    let mut total = 0u64;
    let mut sum = 0.0;
    for &(ego, first, last) in frames {
        for tau in first..=last {
            total += 1;
            let s = scenarios
                .iter()
                .filter(|s| s.recording == ego.recording && s.ego == ego.ego)
                .filter(|s| s.start_frame <= tau && tau <= s.end_frame)
                .count() as u64;
            sum += s.min(n) as f64;
        }
    }
    if total == 0 {
        return Err(CoverageError::NoFrames);
    }
    Ok(sum / (n as f64 * total as f64))
}

/// T_a for every (ego, actor) pair that enters the box at least once.
pub fn actor_time_sets(views: &[EgoDataset], spec: &ActorBoxSpec) -> BTreeMap<(EgoKey, TrackId), BTreeSet<u32>> {
    let mut out: BTreeMap<(EgoKey, TrackId), BTreeSet<u32>> = BTreeMap::new();
    for ego in views {
        for (i, visible) in ego.visible.iter().enumerate() {
            let frame = ego.first_frame + i as u32;
            let e = &ego.ego_states[i];
            for a in visible {
                let dx = a.state.x - e.x;
                let dy = a.state.y - e.y;
                let inside = dx >= -spec.long_rear && dx <= spec.long_front && dy >= -spec.lat_halfwidth && dy <= spec.lat_halfwidth;
                if inside {
                    out.entry((ego.key(), a.actor)).or_default().insert(frame);
                }
            }
        }
    }
    out
}

fn is_member(s: &Scenario, actor: TrackId, membership: ActorMembership) -> bool {
    match membership {
        ActorMembership::Main => s.main_actors.contains(&actor),
        ActorMembership::All => s.actors.contains(&actor),
    }
}

pub fn actor_coverage(
    views: &[EgoDataset],
    scenarios: &[Scenario],
    spec: &ActorBoxSpec,
    membership: ActorMembership,
) -> Result<f64, CoverageError> {
    let sets = actor_time_sets(views, spec);
    if sets.is_empty() {
        return Err(CoverageError::NoActors);
    }
    let covered = sets
        .keys()
        .filter(|(ego, actor)| {
            scenarios
                .iter()
                .any(|s| s.recording == ego.recording && s.ego == ego.ego && is_member(s, *actor, membership))
        })
        .count();
    Ok(covered as f64 / sets.len() as f64)
}

pub fn actor_over_time_coverage(
    views: &[EgoDataset],
    scenarios: &[Scenario],
    spec: &ActorBoxSpec,
    membership: ActorMembership,
) -> Result<f64, CoverageError> {
    let sets = actor_time_sets(views, spec);
    if sets.is_empty() {
        return Err(CoverageError::NoActors);
    }
    let mut sum = 0.0;
    for ((ego, actor), times) in &sets {
        let mut inner = 0.0;
        for &tau in times {
            let s = scenarios
                .iter()
                .filter(|s| s.recording == ego.recording && s.ego == ego.ego)
                .filter(|s| is_member(s, *actor, membership) && s.start_frame <= tau && tau <= s.end_frame)
                .count();
            inner += s.min(1) as f64;
        }
        sum += inner / times.len() as f64;
    }
    Ok(sum / sets.len() as f64)
}
