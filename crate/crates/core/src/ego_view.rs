//! Per-ego datasets: every eligible vehicle is promoted to ego once and sees
//! the other vehicles of its carriageway within the perception radius.

use serde::{Deserialize, Serialize};

use crate::activity::{side_extent, zone_from_lanes, RelativeZone};
use crate::exec::Exec;
use crate::model::{
    lane_of, Direction, EgoKey, Recording, RecordingId, Track, TrackId, TrackState, VehicleClass,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EgoViewParams {
    /// Euclidean center distance (m) within which other vehicles are visible.
    pub perception_radius: f64,
    /// The view ends at the last frame with at least this much path (m) left.
    pub end_truncation_distance: f64,
    /// Vehicles with a shorter traveled distance (m) are never ego.
    pub min_ego_travel: f64,
}

impl Default for EgoViewParams {
    fn default() -> Self {
        EgoViewParams {
            perception_radius: 100.0,
            end_truncation_distance: 100.0,
            min_ego_travel: 100.0,
        }
    }
}

impl EgoViewParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("perception_radius", self.perception_radius),
            ("end_truncation_distance", self.end_truncation_distance),
            ("min_ego_travel", self.min_ego_travel),
        ] {
            if !(v > 0.0) {
                return Err(format!("ego_view.{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// Another vehicle as seen from the ego at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibleActor {
    pub actor: TrackId,
    pub class: VehicleClass,
    pub length: f64,
    pub state: TrackState,
    /// Actor minus ego, longitudinal (m).
    pub dx: f64,
    /// Actor minus ego, lateral (m, positive to the ego's left).
    pub dy: f64,
    /// Actor minus ego, longitudinal speed (m/s).
    pub dvx: f64,
    pub distance: f64,
    pub lane: Option<usize>,
    pub zone: RelativeZone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgoDataset {
    pub recording: RecordingId,
    pub ego: TrackId,
    pub ego_class: VehicleClass,
    pub ego_length: f64,
    pub direction: Direction,
    pub frame_rate: f64,
    pub first_frame: u32,
    pub ego_states: Vec<TrackState>,
    pub ego_lanes: Vec<Option<usize>>,
    /// Per frame, sorted by actor id.
    pub visible: Vec<Vec<VisibleActor>>,
}

impl EgoDataset {
    pub fn key(&self) -> EgoKey {
        EgoKey {
            recording: self.recording,
            ego: self.ego,
        }
    }

    pub fn last_frame(&self) -> u32 {
        self.first_frame + self.ego_states.len() as u32 - 1
    }

    pub fn frame_count(&self) -> usize {
        self.ego_states.len()
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<u32> {
        self.first_frame..=self.last_frame()
    }

    pub fn index(&self, frame: u32) -> Option<usize> {
        let i = frame.checked_sub(self.first_frame)? as usize;
        (i < self.ego_states.len()).then_some(i)
    }

    pub fn ego_state(&self, frame: u32) -> Option<&TrackState> {
        self.index(frame).map(|i| &self.ego_states[i])
    }

    pub fn ego_lane(&self, frame: u32) -> Option<usize> {
        self.index(frame).and_then(|i| self.ego_lanes[i])
    }

    pub fn visible_at(&self, frame: u32) -> &[VisibleActor] {
        self.index(frame).map_or(&[], |i| &self.visible[i])
    }

    pub fn actor_at(&self, frame: u32, actor: TrackId) -> Option<&VisibleActor> {
        let v = self.visible_at(frame);
        v.binary_search_by_key(&actor, |a| a.actor).ok().map(|i| &v[i])
    }

    /// Nearest visible actor in the ego lane ahead (by `dx`), if any.
    pub fn leading_vehicle_at(&self, frame: u32) -> Option<&VisibleActor> {
        self.visible_at(frame)
            .iter()
            .filter(|a| a.zone == RelativeZone::SameLaneFront)
            .min_by(|a, b| a.dx.total_cmp(&b.dx).then(a.actor.cmp(&b.actor)))
    }

    /// Nearest visible actor in the ego lane behind, if any.
    pub fn following_vehicle_at(&self, frame: u32) -> Option<&VisibleActor> {
        self.visible_at(frame)
            .iter()
            .filter(|a| a.zone == RelativeZone::SameLaneRear)
            .max_by(|a, b| a.dx.total_cmp(&b.dx).then(b.actor.cmp(&a.actor)))
    }

    /// Every actor visible at least once, ascending.
    pub fn actor_ids(&self) -> Vec<TrackId> {
        let mut ids: Vec<TrackId> = self.visible.iter().flatten().map(|a| a.actor).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

pub fn leading_vehicle_at(ego: &EgoDataset, frame: u32) -> Option<TrackId> {
    ego.leading_vehicle_at(frame).map(|a| a.actor)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EgoViewSummary {
    pub tracks: usize,
    pub ego_datasets: usize,
    /// Traveled less than `min_ego_travel`.
    pub too_short: usize,
    /// Eligible but nothing left after truncation.
    pub empty_after_truncation: usize,
}

#[derive(Debug, Clone)]
pub struct EgoViews {
    pub datasets: Vec<EgoDataset>,
    pub summary: EgoViewSummary,
}

/// Per frame and carriageway, vehicles sorted by `x`.
struct FrameIndex {
    first_frame: u32,
    upper: Vec<Vec<(f64, u32)>>,
    lower: Vec<Vec<(f64, u32)>>,
}

impl FrameIndex {
    fn build(r: &Recording) -> FrameIndex {
        let n = (r.last_frame.saturating_sub(r.first_frame) + 1) as usize;
        let mut upper = vec![Vec::new(); n];
        let mut lower = vec![Vec::new(); n];
        for (ti, t) in r.tracks.iter().enumerate() {
            let bucket = match t.direction {
                Direction::Upper => &mut upper,
                Direction::Lower => &mut lower,
            };
            for s in &t.states {
                if let Some(slot) = s
                    .frame
                    .checked_sub(r.first_frame)
                    .and_then(|i| bucket.get_mut(i as usize))
                {
                    slot.push((s.x, ti as u32));
                }
            }
        }
        for frame in upper.iter_mut().chain(lower.iter_mut()) {
            frame.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        FrameIndex {
            first_frame: r.first_frame,
            upper,
            lower,
        }
    }

    fn at(&self, direction: Direction, frame: u32) -> &[(f64, u32)] {
        let frames = match direction {
            Direction::Upper => &self.upper,
            Direction::Lower => &self.lower,
        };
        frame
            .checked_sub(self.first_frame)
            .and_then(|i| frames.get(i as usize))
            .map_or(&[], Vec::as_slice)
    }
}

/// Number of leading frames kept: the view ends at the last frame whose
/// remaining along-track distance is at least `truncation`.
pub fn truncated_len(track: &Track, truncation: f64) -> usize {
    let mut cumulative = Vec::with_capacity(track.states.len());
    let mut s = 0.0;
    cumulative.push(0.0);
    for w in track.states.windows(2) {
        s += (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
        cumulative.push(s);
    }
    let total = s;
    cumulative.iter().take_while(|&&c| total - c >= truncation).count()
}

fn build_view(r: &Recording, index: &FrameIndex, track: &Track, keep: usize, p: &EgoViewParams) -> EgoDataset {
    let layout = &r.lane_layout;
    let states = &track.states[..keep];
    let mut visible = Vec::with_capacity(keep);
    let mut ego_lanes = Vec::with_capacity(keep);
    for ego in states {
        let ego_lane = lane_of(ego.y, track.direction, layout);
        ego_lanes.push(ego_lane);
        let row = index.at(track.direction, ego.frame);
        // the window is padded so rounding in `x +- r` never drops an actor
        // that the exact distance test below accepts
        let reach = p.perception_radius * (1.0 + 1e-9) + 1e-9;
        let lo = row.partition_point(|e| e.0 < ego.x - reach);
        let hi = row.partition_point(|e| e.0 <= ego.x + reach);
        let mut seen: Vec<VisibleActor> = row[lo..hi]
            .iter()
            .filter_map(|&(_, ti)| {
                let other = &r.tracks[ti as usize];
                if other.id == track.id {
                    return None;
                }
                let st = other.state_at(ego.frame)?;
                let dx = st.x - ego.x;
                let dy = st.y - ego.y;
                let distance = dx.hypot(dy);
                if distance > p.perception_radius {
                    return None;
                }
                let lane = lane_of(st.y, other.direction, layout);
                Some(VisibleActor {
                    actor: other.id,
                    class: other.class,
                    length: other.length,
                    state: *st,
                    dx,
                    dy,
                    dvx: st.vx - ego.vx,
                    distance,
                    lane,
                    zone: zone_from_lanes(ego_lane, lane, dx, side_extent(track.length, other.length)),
                })
            })
            .collect();
        seen.sort_by_key(|a| a.actor);
        visible.push(seen);
    }
    EgoDataset {
        recording: r.id,
        ego: track.id,
        ego_class: track.class,
        ego_length: track.length,
        direction: track.direction,
        frame_rate: r.frame_rate,
        first_frame: track.first_frame(),
        ego_states: states.to_vec(),
        ego_lanes,
        visible,
    }
}

/// One dataset per track that traveled at least `min_ego_travel`, ordered by ego id.
pub fn generate_ego_views(r: &Recording, p: &EgoViewParams) -> EgoViews {
    generate_ego_views_with(r, p, Exec::default())
}

pub fn generate_ego_views_with(r: &Recording, p: &EgoViewParams, exec: Exec) -> EgoViews {
    let index = FrameIndex::build(r);
    let mut order: Vec<usize> = (0..r.tracks.len()).collect();
    order.sort_by_key(|&i| r.tracks[i].id);

    let mut summary = EgoViewSummary {
        tracks: r.tracks.len(),
        ..Default::default()
    };
    let mut eligible = Vec::new();
    for i in order {
        let t = &r.tracks[i];
        if t.states.is_empty() || t.traveled_distance() < p.min_ego_travel {
            summary.too_short += 1;
            continue;
        }
        let keep = truncated_len(t, p.end_truncation_distance);
        if keep == 0 {
            summary.empty_after_truncation += 1;
            continue;
        }
        eligible.push((i, keep));
    }
    let datasets = exec.map(&eligible, |&(i, keep)| build_view(r, &index, &r.tracks[i], keep, p));
    summary.ego_datasets = datasets.len();
    EgoViews { datasets, summary }
}
