//! Coverage metrics: tag coverage, time coverage, actor coverage and actor
//! coverage over time, plus the actor-box selection they rely on.
//!
//! Sums are accumulated in integers and divided once at the end, so results
//! do not depend on reduction order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ego_view::EgoDataset;
use crate::exec::Exec;
use crate::model::{EgoKey, Scenario, ScenarioCategory, Tag, TrackId};
use crate::tagging::TagCountMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverageError {
    #[error("tag subset is empty")]
    EmptyTags,
    #[error("category subset is empty")]
    EmptyCategories,
    #[error("n must be a positive integer")]
    ZeroN,
    #[error("no frames to evaluate time coverage on")]
    NoFrames,
    #[error("no actors selected by the box")]
    NoActors,
    #[error("invalid actor box: {0}")]
    InvalidBox(String),
    #[error("parameter grid is empty")]
    EmptyGrid,
}

/// Exact non-negative ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u128,
    pub den: u128,
}

impl Ratio {
    pub fn value(self) -> f64 {
        if self.num == self.den {
            1.0
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

/// Exact tag coverage: sum of min(n, kappa) over the selected cells, over
/// n * |tags| * |categories|. Cells absent from the matrix count as zero.
pub fn tag_coverage_ratio(
    m: &TagCountMatrix,
    tags: &[Tag],
    categories: &[ScenarioCategory],
    n: u64,
) -> Result<Ratio, CoverageError> {
    if tags.is_empty() {
        return Err(CoverageError::EmptyTags);
    }
    if categories.is_empty() {
        return Err(CoverageError::EmptyCategories);
    }
    if n == 0 {
        return Err(CoverageError::ZeroN);
    }
    let mut num: u128 = 0;
    for &t in tags {
        for &c in categories {
            num += u128::from(m.get(t, c).unwrap_or(0).min(n));
        }
    }
    let den = u128::from(n) * tags.len() as u128 * categories.len() as u128;
    Ok(Ratio { num, den })
}

pub fn tag_coverage(
    m: &TagCountMatrix,
    tags: &[Tag],
    categories: &[ScenarioCategory],
    n: u64,
) -> Result<f64, CoverageError> {
    tag_coverage_ratio(m, tags, categories, n).map(Ratio::value)
}

/// Frame range of one ego dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EgoFrames {
    pub key: EgoKey,
    pub first_frame: u32,
    pub last_frame: u32,
}

impl EgoFrames {
    pub fn of(ego: &EgoDataset) -> Self {
        EgoFrames {
            key: ego.key(),
            first_frame: ego.first_frame,
            last_frame: ego.last_frame(),
        }
    }

    pub fn frame_count(&self) -> u64 {
        u64::from(self.last_frame - self.first_frame + 1)
    }
}

/// Number of frames per concurrent-scenario count s(tau), pooled over ego
/// datasets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeHistogram {
    pub frames_by_count: BTreeMap<u64, u64>,
}

impl TimeHistogram {
    /// Adds one ego dataset; scenarios of other ego datasets are ignored and
    /// intervals are clipped to the dataset.
    pub fn add_ego<'a>(&mut self, ego: &EgoFrames, scenarios: impl IntoIterator<Item = &'a Scenario>) {
        let len = ego.frame_count() as usize;
        let mut delta = vec![0i64; len + 1];
        for s in scenarios {
            if s.ego_key() != ego.key || s.end_frame < ego.first_frame || s.start_frame > ego.last_frame {
                continue;
            }
            let a = (s.start_frame.max(ego.first_frame) - ego.first_frame) as usize;
            let b = (s.end_frame.min(ego.last_frame) - ego.first_frame) as usize;
            delta[a] += 1;
            delta[b + 1] -= 1;
        }
        let mut active = 0i64;
        for d in &delta[..len] {
            active += d;
            *self.frames_by_count.entry(active as u64).or_default() += 1;
        }
    }

    pub fn merge(&mut self, other: &TimeHistogram) {
        for (&s, &f) in &other.frames_by_count {
            *self.frames_by_count.entry(s).or_default() += f;
        }
    }

    pub fn total_frames(&self) -> u64 {
        self.frames_by_count.values().sum()
    }

    pub fn ratio(&self, n: u64) -> Result<Ratio, CoverageError> {
        if n == 0 {
            return Err(CoverageError::ZeroN);
        }
        let total = self.total_frames();
        if total == 0 {
            return Err(CoverageError::NoFrames);
        }
        let num = self
            .frames_by_count
            .iter()
            .map(|(&s, &f)| u128::from(s.min(n)) * u128::from(f))
            .sum();
        Ok(Ratio {
            num,
            den: u128::from(n) * u128::from(total),
        })
    }

    pub fn coverage(&self, n: u64) -> Result<f64, CoverageError> {
        self.ratio(n).map(Ratio::value)
    }
}

fn group_by_ego<'a>(scenarios: impl IntoIterator<Item = &'a Scenario>) -> HashMap<EgoKey, Vec<&'a Scenario>> {
    let mut map: HashMap<EgoKey, Vec<&Scenario>> = HashMap::new();
    for s in scenarios {
        map.entry(s.ego_key()).or_default().push(s);
    }
    map
}

pub fn time_histogram(egos: &[EgoFrames], scenarios: &[Scenario]) -> TimeHistogram {
    let by_ego = group_by_ego(scenarios);
    let mut h = TimeHistogram::default();
    for e in egos {
        h.add_ego(e, by_ego.get(&e.key).into_iter().flatten().copied());
    }
    h
}

pub fn time_coverage(egos: &[EgoFrames], scenarios: &[Scenario], n: u64) -> Result<f64, CoverageError> {
    if n == 0 {
        return Err(CoverageError::ZeroN);
    }
    time_histogram(egos, scenarios).coverage(n)
}

/// Box around the ego that defines the relevant actors. Offsets are
/// centre-to-centre and inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorBoxSpec {
    pub long_front: f64,
    /// 0 means front only.
    pub long_rear: f64,
    pub lat_halfwidth: f64,
}

impl ActorBoxSpec {
    pub fn validate(&self) -> Result<(), CoverageError> {
        if !(self.long_front > 0.0) {
            return Err(CoverageError::InvalidBox(format!("long_front must be > 0, got {}", self.long_front)));
        }
        if !(self.long_rear >= 0.0) {
            return Err(CoverageError::InvalidBox(format!("long_rear must be >= 0, got {}", self.long_rear)));
        }
        if !(self.lat_halfwidth > 0.0) {
            return Err(CoverageError::InvalidBox(format!(
                "lat_halfwidth must be > 0, got {}",
                self.lat_halfwidth
            )));
        }
        Ok(())
    }

    pub fn contains(&self, dx: f64, dy: f64) -> bool {
        -self.long_rear <= dx && dx <= self.long_front && dy.abs() <= self.lat_halfwidth
    }

    pub fn label(&self) -> String {
        format!("front{}_rear{}_lat{}", self.long_front, self.long_rear, self.lat_halfwidth)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedActor {
    pub ego: EgoKey,
    pub actor: TrackId,
    /// Ascending frames at which the actor is inside the box.
    pub frames: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorSelection {
    /// Sorted by (ego, actor); every entry has at least one frame.
    pub actors: Vec<SelectedActor>,
}

fn select_in(ego: &EgoDataset, spec: &ActorBoxSpec) -> Vec<SelectedActor> {
    let mut frames: BTreeMap<TrackId, Vec<u32>> = BTreeMap::new();
    for (frame, visible) in ego.frames().zip(&ego.visible) {
        for a in visible.iter().filter(|a| spec.contains(a.dx, a.dy)) {
            frames.entry(a.actor).or_default().push(frame);
        }
    }
    frames
        .into_iter()
        .map(|(actor, frames)| SelectedActor {
            ego: ego.key(),
            actor,
            frames,
        })
        .collect()
}

pub fn select_actors(views: &[EgoDataset], spec: &ActorBoxSpec) -> Result<ActorSelection, CoverageError> {
    spec.validate()?;
    let mut actors: Vec<SelectedActor> = views.iter().flat_map(|e| select_in(e, spec)).collect();
    actors.sort_by_key(|a| (a.ego, a.actor));
    Ok(ActorSelection { actors })
}

/// Which scenario actors count as covered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActorMembership {
    #[default]
    Main,
    All,
}

impl ActorMembership {
    fn members(self, s: &Scenario) -> &BTreeSet<TrackId> {
        match self {
            ActorMembership::Main => &s.main_actors,
            ActorMembership::All => &s.actors,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActorMembership::Main => "main",
            ActorMembership::All => "all",
        }
    }
}

/// Mergeable integer state for both actor metrics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorAccumulator {
    /// |A|
    pub selected: u64,
    /// |A intersect A_S|
    pub in_scenario: u64,
    /// |T_a| -> sum over actors with that |T_a| of covered frames in T_a.
    pub covered_by_len: BTreeMap<u64, u64>,
}

impl ActorAccumulator {
    pub fn add(&mut self, a: &SelectedActor, scenarios: &[&Scenario], membership: ActorMembership) {
        debug_assert!(!a.frames.is_empty());
        let mine: Vec<&Scenario> = scenarios
            .iter()
            .copied()
            .filter(|s| s.ego_key() == a.ego && membership.members(s).contains(&a.actor))
            .collect();
        self.selected += 1;
        if !mine.is_empty() {
            self.in_scenario += 1;
        }
        let covered = a
            .frames
            .iter()
            .filter(|&&f| mine.iter().any(|s| s.contains_frame(f)))
            .count() as u64;
        *self.covered_by_len.entry(a.frames.len() as u64).or_default() += covered;
    }

    pub fn from_selection(sel: &ActorSelection, scenarios: &[Scenario], membership: ActorMembership) -> Self {
        let by_ego = group_by_ego(scenarios);
        let mut acc = ActorAccumulator::default();
        for a in &sel.actors {
            let list = by_ego.get(&a.ego).map(Vec::as_slice).unwrap_or(&[]);
            acc.add(a, list, membership);
        }
        acc
    }

    pub fn merge(&mut self, other: &ActorAccumulator) {
        self.selected += other.selected;
        self.in_scenario += other.in_scenario;
        for (&len, &c) in &other.covered_by_len {
            *self.covered_by_len.entry(len).or_default() += c;
        }
    }

    pub fn actor_coverage_ratio(&self) -> Result<Ratio, CoverageError> {
        if self.selected == 0 {
            return Err(CoverageError::NoActors);
        }
        Ok(Ratio {
            num: u128::from(self.in_scenario),
            den: u128::from(self.selected),
        })
    }

    pub fn actor_coverage(&self) -> Result<f64, CoverageError> {
        self.actor_coverage_ratio().map(Ratio::value)
    }

    pub fn actor_over_time_coverage(&self) -> Result<f64, CoverageError> {
        if self.selected == 0 {
            return Err(CoverageError::NoActors);
        }
        let sum: f64 = self
            .covered_by_len
            .iter()
            .map(|(&len, &covered)| covered as f64 / len as f64)
            .sum();
        Ok(sum / self.selected as f64)
    }
}

pub fn actor_coverage(sel: &ActorSelection, scenarios: &[Scenario], membership: ActorMembership) -> Result<f64, CoverageError> {
    ActorAccumulator::from_selection(sel, scenarios, membership).actor_coverage()
}

pub fn actor_over_time_coverage(
    sel: &ActorSelection,
    scenarios: &[Scenario],
    membership: ActorMembership,
) -> Result<f64, CoverageError> {
    ActorAccumulator::from_selection(sel, scenarios, membership).actor_over_time_coverage()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub param: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

impl CoverageCurve {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// Evaluates `metric` at every grid point, keeping grid order.
pub fn sweep<P, F>(label: &str, grid: &[P], exec: Exec, param: impl Fn(&P) -> f64, metric: F) -> Result<CoverageCurve, CoverageError>
where
    P: Sync,
    F: Fn(&P) -> Result<f64, CoverageError> + Sync + Send,
{
    if grid.is_empty() {
        return Err(CoverageError::EmptyGrid);
    }
    let values = exec.map(grid, |p| metric(p));
    let mut points = Vec::with_capacity(grid.len());
    for (p, v) in grid.iter().zip(values) {
        let value = v?;
        debug_assert!((0.0..=1.0).contains(&value));
        points.push(CurvePoint { param: param(p), value });
    }
    Ok(CoverageCurve {
        label: label.to_string(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RecordingId, ScenarioClass};

    fn key(ego: u32) -> EgoKey {
        EgoKey {
            recording: RecordingId(1),
            ego: TrackId(ego),
        }
    }

    fn scenario(ego: u32, start: u32, end: u32, main: &[u32]) -> Scenario {
        Scenario {
            category: ScenarioCategory::C1.into(),
            recording: RecordingId(1),
            ego: TrackId(ego),
            start_frame: start,
            end_frame: end,
            main_actors: main.iter().map(|&a| TrackId(a)).collect(),
            actors: main.iter().map(|&a| TrackId(a)).collect(),
            tags: BTreeSet::new(),
        }
    }

    #[test]
    fn tag_coverage_examples() {
        let mut m = TagCountMatrix::zeros(&[Tag::Car], &[ScenarioCategory::C1]);
        m.set(Tag::Car, ScenarioCategory::C1, 3);
        assert_eq!(tag_coverage(&m, &[Tag::Car], &[ScenarioCategory::C1], 5).unwrap(), 0.6);
        assert_eq!(tag_coverage(&m, &[Tag::Car], &[ScenarioCategory::C1], 3).unwrap(), 1.0);
        let z = TagCountMatrix::zeros(&Tag::ALL, &ScenarioCategory::ALL);
        assert_eq!(tag_coverage(&z, &Tag::ALL, &ScenarioCategory::ALL, 7).unwrap(), 0.0);
        assert_eq!(tag_coverage(&m, &[], &[ScenarioCategory::C1], 1), Err(CoverageError::EmptyTags));
        assert_eq!(tag_coverage(&m, &[Tag::Car], &[], 1), Err(CoverageError::EmptyCategories));
        assert_eq!(tag_coverage(&m, &[Tag::Car], &[ScenarioCategory::C1], 0), Err(CoverageError::ZeroN));
    }

    #[test]
    fn time_coverage_examples() {
        let egos = [EgoFrames {
            key: key(1),
            first_frame: 1,
            last_frame: 100,
        }];
        let half = [scenario(1, 1, 50, &[2])];
        assert_eq!(time_coverage(&egos, &half, 2).unwrap(), 0.25);
        assert_eq!(time_coverage(&egos, &half, 1).unwrap(), 0.5);
        let full = [scenario(1, 1, 60, &[2]), scenario(1, 40, 100, &[3])];
        assert_eq!(time_coverage(&egos, &full, 1).unwrap(), 1.0);
        assert_eq!(time_coverage(&[], &full, 1), Err(CoverageError::NoFrames));
        // scenarios of other egos do not leak in
        let other = [scenario(2, 1, 100, &[2])];
        assert_eq!(time_coverage(&egos, &other, 1).unwrap(), 0.0);
    }

    #[test]
    fn actor_metrics_examples() {
        let sel = ActorSelection {
            actors: vec![SelectedActor {
                ego: key(1),
                actor: TrackId(2),
                frames: (1..=60).collect(),
            }],
        };
        let s = [scenario(1, 31, 90, &[2])];
        assert_eq!(actor_coverage(&sel, &s, ActorMembership::Main).unwrap(), 1.0);
        assert_eq!(actor_over_time_coverage(&sel, &s, ActorMembership::Main).unwrap(), 0.5);
        assert_eq!(
            actor_coverage(&ActorSelection::default(), &s, ActorMembership::Main),
            Err(CoverageError::NoActors)
        );
    }

    #[test]
    fn four_actors_three_covered() {
        let sel = ActorSelection {
            actors: (2..=5)
                .map(|a| SelectedActor {
                    ego: key(1),
                    actor: TrackId(a),
                    frames: vec![1, 2],
                })
                .collect(),
        };
        let s = [scenario(1, 1, 2, &[2, 3]), scenario(1, 1, 1, &[4])];
        assert_eq!(actor_coverage(&sel, &s, ActorMembership::Main).unwrap(), 0.75);
        let t = actor_over_time_coverage(&sel, &s, ActorMembership::Main).unwrap();
        assert!((t - 2.5 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn membership_all_uses_every_actor() {
        let sel = ActorSelection {
            actors: vec![SelectedActor {
                ego: key(1),
                actor: TrackId(9),
                frames: vec![5],
            }],
        };
        let mut s = scenario(1, 1, 10, &[2]);
        s.category = ScenarioClass::NoLeadingVehicle;
        s.main_actors.clear();
        s.actors.insert(TrackId(9));
        let s = [s];
        assert_eq!(actor_coverage(&sel, &s, ActorMembership::Main).unwrap(), 0.0);
        assert_eq!(actor_coverage(&sel, &s, ActorMembership::All).unwrap(), 1.0);
    }

    #[test]
    fn box_is_closed() {
        let b = ActorBoxSpec {
            long_front: 10.0,
            long_rear: 0.0,
            lat_halfwidth: 1.5,
        };
        assert!(b.contains(10.0, 1.5));
        assert!(b.contains(0.0, -1.5));
        assert!(!b.contains(-0.1, 0.0));
        assert!(!b.contains(5.0, 1.6));
        assert!(ActorBoxSpec { lat_halfwidth: 0.0, ..b }.validate().is_err());
    }

    #[test]
    fn sweep_keeps_order_and_rejects_empty_grid() {
        let grid = [1u64, 10, 100];
        let c = sweep("n", &grid, Exec::Sequential, |&n| n as f64, |&n| Ok(1.0 / n as f64)).unwrap();
        assert_eq!(c.values(), vec![1.0, 0.1, 0.01]);
        let empty: [u64; 0] = [];
        assert_eq!(
            sweep("n", &empty, Exec::Sequential, |&n| n as f64, |_| Ok(1.0)),
            Err(CoverageError::EmptyGrid)
        );
    }
}
