//! Scenario detectors for the ten highway categories.
//!
//! Detector rules (frames inclusive, all within the ego dataset):
//!
//! * C1/C2/C3: ego keeps lane, the actor is the leading vehicle, keeps lane
//!   and has a cruising/accelerating/decelerating segment. One scenario per
//!   maximal run of at least `min_duration_state`.
//! * C4: as C1 without the longitudinal condition, but the leader is slower
//!   than the ego by more than `approach_dv_min` on every frame.
//! * C5: a lane change of the actor ending in the ego lane with the actor as
//!   leading vehicle at its end frame; interval = the lane change.
//! * C6: the leading vehicle at the first frame of a lane change that leaves
//!   the ego lane; interval = the lane change.
//! * C7: an ego lane change with an actor in the rear zone of the target lane
//!   at its start; the nearest such actor is the main actor.
//! * C8: an ego lane change after which a leader and a follower are present,
//!   both keeping lane over the whole change.
//! * C9/C10: an actor on an adjacent lane whose longitudinal offset changes
//!   sign (`+ -> -` for C9, `- -> +` for C10) while both vehicles keep lane;
//!   interval = the run of frames around the crossing where the actor stays
//!   visible, clipped to both keep-lane segments.
//!
//! C5 to C8 only use lane-change segments whose relevant end lies in the ego
//! dataset. C1 to C6, C9 and C10 require the ego to keep lane over the interval.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::activity::{
    ActivityConfig, ActivitySegment, LateralKind, LongitudinalKind, RelativeZone, TrackActivities,
};
use crate::ego_view::EgoDataset;
use crate::exec::Exec;
use crate::model::{
    Recording, Scenario, ScenarioCategory, ScenarioClass, Side, TrackId,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    /// Closing speed (m/s) for "approaching slower vehicle".
    pub approach_dv_min: f64,
    /// Minimum duration (s) of the state categories C1 to C4.
    pub min_duration_state: f64,
    /// Minimum duration (s) of the event categories C5 to C10.
    pub min_duration_event: f64,
    /// Categories to detect.
    pub categories: Vec<ScenarioCategory>,
    /// Also emit "no leading vehicle" scenarios.
    pub catch_all: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            approach_dv_min: 1.0,
            min_duration_state: 1.0,
            min_duration_event: 0.0,
            categories: ScenarioCategory::ALL.to_vec(),
            catch_all: false,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.approach_dv_min > 0.0) {
            return Err(format!(
                "mining.approach_dv_min must be > 0, got {}",
                self.approach_dv_min
            ));
        }
        if !(self.min_duration_state >= 0.0) || !(self.min_duration_event >= 0.0) {
            return Err("mining durations must be >= 0".into());
        }
        Ok(())
    }

    fn enabled(&self, c: ScenarioCategory) -> bool {
        self.categories.contains(&c)
    }

    fn min_frames(&self, c: ScenarioCategory, frame_rate: f64) -> u32 {
        use ScenarioCategory::*;
        let seconds = match c {
            C1 | C2 | C3 | C4 => self.min_duration_state,
            _ => self.min_duration_event,
        };
        (seconds * frame_rate - 1e-9).ceil().max(1.0) as u32
    }
}

/// Activity segmentations of all tracks of one recording, keyed by track.
#[derive(Debug, Clone, Default)]
pub struct ActivityIndex {
    by_track: HashMap<TrackId, TrackActivities>,
}

impl ActivityIndex {
    pub fn compute(r: &Recording, cfg: &ActivityConfig, exec: Exec) -> ActivityIndex {
        let all = exec.map(&r.tracks, |t| {
            TrackActivities::compute(t, &r.lane_layout, cfg, r.frame_rate)
        });
        ActivityIndex {
            by_track: all.into_iter().map(|a| (a.track, a)).collect(),
        }
    }

    pub fn get(&self, id: TrackId) -> Option<&TrackActivities> {
        self.by_track.get(&id)
    }

    pub fn insert(&mut self, acts: TrackActivities) {
        self.by_track.insert(acts.track, acts);
    }
}

struct Ctx<'a> {
    ego: &'a EgoDataset,
    acts: &'a ActivityIndex,
    cfg: &'a MiningConfig,
    ego_acts: Option<&'a TrackActivities>,
}

impl<'a> Ctx<'a> {
    fn ego_keeps(&self, frame: u32) -> bool {
        self.ego_acts.and_then(|a| a.lateral_at(frame)) == Some(LateralKind::KeepLane)
    }

    fn ego_keeps_over(&self, start: u32, end: u32) -> bool {
        self.ego_acts.is_some_and(|a| a.keeps_lane_over(start, end))
    }

    fn leader(&self, frame: u32) -> Option<TrackId> {
        self.ego.leading_vehicle_at(frame).map(|a| a.actor)
    }

    fn scenario(&self, category: ScenarioCategory, start: u32, end: u32, main: &[TrackId]) -> Scenario {
        Scenario {
            category: category.into(),
            recording: self.ego.recording,
            ego: self.ego.ego,
            start_frame: start,
            end_frame: end,
            main_actors: main.iter().copied().collect(),
            actors: visible_between(self.ego, start, end),
            tags: BTreeSet::new(),
        }
    }
}

fn visible_between(ego: &EgoDataset, start: u32, end: u32) -> BTreeSet<TrackId> {
    (start..=end)
        .flat_map(|f| ego.visible_at(f).iter().map(|a| a.actor))
        .collect()
}

/// Frame-wise leader condition for the state categories.
fn leader_condition(ctx: &Ctx, category: ScenarioCategory, frame: u32) -> Option<TrackId> {
    if !ctx.ego_keeps(frame) {
        return None;
    }
    let leader = ctx.ego.leading_vehicle_at(frame)?;
    let acts = ctx.acts.get(leader.actor)?;
    if acts.lateral_at(frame) != Some(LateralKind::KeepLane) {
        return None;
    }
    let ok = match category {
        ScenarioCategory::C1 => acts.longitudinal_at(frame) == Some(LongitudinalKind::Cruising),
        ScenarioCategory::C2 => acts.longitudinal_at(frame) == Some(LongitudinalKind::Accelerating),
        ScenarioCategory::C3 => acts.longitudinal_at(frame) == Some(LongitudinalKind::Decelerating),
        ScenarioCategory::C4 => {
            let ego_vx = ctx.ego.ego_state(frame)?.vx;
            leader.state.vx < ego_vx - ctx.cfg.approach_dv_min
        }
        _ => false,
    };
    ok.then_some(leader.actor)
}

fn mine_state_category(ctx: &Ctx, category: ScenarioCategory, out: &mut Vec<Scenario>) {
    let min_frames = ctx.cfg.min_frames(category, ctx.ego.frame_rate);
    let mut run: Option<(TrackId, u32, u32)> = None;
    let flush = |run: Option<(TrackId, u32, u32)>, out: &mut Vec<Scenario>| {
        if let Some((actor, s, e)) = run {
            if e - s + 1 >= min_frames {
                out.push(ctx.scenario(category, s, e, &[actor]));
            }
        }
    };
    for frame in ctx.ego.frames() {
        let hit = leader_condition(ctx, category, frame);
        run = match (run, hit) {
            (Some((a, s, _)), Some(b)) if a == b => Some((a, s, frame)),
            (prev, Some(b)) => {
                flush(prev, out);
                Some((b, frame, frame))
            }
            (prev, None) => {
                flush(prev, out);
                None
            }
        };
    }
    flush(run, out);
}

fn lane_id_at(ctx: &Ctx, actor: TrackId, frame: u32) -> Option<i32> {
    ctx.ego.actor_at(frame, actor).map(|a| a.state.lane_id)
}

fn ego_lane_id(ctx: &Ctx, frame: u32) -> Option<i32> {
    ctx.ego.ego_state(frame).map(|s| s.lane_id)
}

fn change_segments(acts: &TrackActivities) -> impl Iterator<Item = &ActivitySegment<LateralKind>> {
    acts.lateral.iter().filter(|s| s.kind.is_change())
}

fn mine_cut_in(ctx: &Ctx, actors: &[TrackId], out: &mut Vec<Scenario>) {
    let (first, last) = (ctx.ego.first_frame, ctx.ego.last_frame());
    for &actor in actors {
        let Some(acts) = ctx.acts.get(actor) else { continue };
        for seg in change_segments(acts) {
            let end = seg.end_frame;
            if end < first || end > last {
                continue;
            }
            let start = seg.start_frame.max(first);
            let Some(lane_end) = lane_id_at(ctx, actor, end) else { continue };
            if Some(lane_end) != ego_lane_id(ctx, end) || ctx.leader(end) != Some(actor) {
                continue;
            }
            if !ctx.ego.actor_at(end, actor).is_some_and(|a| a.zone.is_front()) {
                continue;
            }
            if !ctx.ego_keeps_over(start, end) {
                continue;
            }
            out.push(ctx.scenario(ScenarioCategory::C5, start, end, &[actor]));
        }
    }
}

fn mine_cut_out(ctx: &Ctx, actors: &[TrackId], out: &mut Vec<Scenario>) {
    let (first, last) = (ctx.ego.first_frame, ctx.ego.last_frame());
    for &actor in actors {
        let Some(acts) = ctx.acts.get(actor) else { continue };
        for seg in change_segments(acts) {
            let start = seg.start_frame;
            if start < first || start > last {
                continue;
            }
            let end = seg.end_frame.min(last);
            if ctx.leader(start) != Some(actor) {
                continue;
            }
            // the actor must end up outside the ego lane
            let ego_lane = ego_lane_id(ctx, start);
            let leaves = match lane_id_at(ctx, actor, seg.end_frame) {
                Some(l) => Some(l) != ego_lane,
                None => true,
            };
            if !leaves || !ctx.ego_keeps_over(start, end) {
                continue;
            }
            out.push(ctx.scenario(ScenarioCategory::C6, start, end, &[actor]));
        }
    }
}

fn mine_ego_lane_changes(ctx: &Ctx, out: &mut Vec<Scenario>) {
    let Some(ego_acts) = ctx.ego_acts else { return };
    let (first, last) = (ctx.ego.first_frame, ctx.ego.last_frame());
    for seg in change_segments(ego_acts) {
        let start = seg.start_frame;
        if start < first || start > last {
            continue;
        }
        let side = seg.kind.side().expect("change segment has a side");

        if ctx.cfg.enabled(ScenarioCategory::C7) {
            let end = seg.end_frame.min(last);
            let target = ctx.ego.ego_lane(start).map(|l| match side {
                Side::Left => l as i64 + 1,
                Side::Right => l as i64 - 1,
            });
            let behind = ctx
                .ego
                .visible_at(start)
                .iter()
                .filter(|a| a.zone.is_rear_on(side) && a.lane.map(|l| l as i64) == target)
                .max_by(|a, b| a.dx.total_cmp(&b.dx).then(b.actor.cmp(&a.actor)));
            if let Some(actor) = behind {
                out.push(ctx.scenario(ScenarioCategory::C7, start, end, &[actor.actor]));
            }
        }

        if ctx.cfg.enabled(ScenarioCategory::C8) && seg.end_frame <= last {
            let end = seg.end_frame;
            let leader = ctx.ego.leading_vehicle_at(end).map(|a| a.actor);
            let follower = ctx.ego.following_vehicle_at(end).map(|a| a.actor);
            if let (Some(lead), Some(follow)) = (leader, follower) {
                let keeps = |id: TrackId| ctx.acts.get(id).is_some_and(|a| a.keeps_lane_over(start, end));
                if keeps(lead) && keeps(follow) {
                    out.push(ctx.scenario(ScenarioCategory::C8, start, end, &[lead, follow]));
                }
            }
        }
    }
}

fn mine_overtaking(ctx: &Ctx, actors: &[TrackId], out: &mut Vec<Scenario>) {
    let Some(ego_acts) = ctx.ego_acts else { return };
    let (first, last) = (ctx.ego.first_frame, ctx.ego.last_frame());
    for &actor in actors {
        let Some(acts) = ctx.acts.get(actor) else { continue };
        for frame in first + 1..=last {
            let (Some(prev), Some(cur)) = (ctx.ego.actor_at(frame - 1, actor), ctx.ego.actor_at(frame, actor)) else {
                continue;
            };
            let category = if prev.dx > 0.0 && cur.dx <= 0.0 {
                ScenarioCategory::C9
            } else if prev.dx < 0.0 && cur.dx >= 0.0 {
                ScenarioCategory::C10
            } else {
                continue;
            };
            if !ctx.cfg.enabled(category) {
                continue;
            }
            let adjacent = |a: &crate::ego_view::VisibleActor, f: u32| match (a.lane, ctx.ego.ego_lane(f)) {
                (Some(l), Some(e)) => l.abs_diff(e) == 1,
                _ => false,
            };
            if !adjacent(prev, frame - 1) || !adjacent(cur, frame) {
                continue;
            }
            let (Some(ego_seg), Some(actor_seg)) = (ego_acts.lateral_segment_at(frame), acts.lateral_segment_at(frame)) else {
                continue;
            };
            if ego_seg.kind != LateralKind::KeepLane
                || actor_seg.kind != LateralKind::KeepLane
                || !ego_seg.contains(frame - 1)
                || !actor_seg.contains(frame - 1)
            {
                continue;
            }
            let lo = ego_seg.start_frame.max(actor_seg.start_frame).max(first);
            let hi = ego_seg.end_frame.min(actor_seg.end_frame).min(last);
            let mut start = frame;
            while start > lo && ctx.ego.actor_at(start - 1, actor).is_some() {
                start -= 1;
            }
            let mut end = frame;
            while end < hi && ctx.ego.actor_at(end + 1, actor).is_some() {
                end += 1;
            }
            out.push(ctx.scenario(category, start, end, &[actor]));
        }
    }
}

fn mine_catch_all(ctx: &Ctx, out: &mut Vec<Scenario>) {
    let first = ctx.ego.first_frame;
    let n = ctx.ego.frame_count();
    let mut covered = vec![false; n];
    for s in out.iter() {
        for f in s.start_frame..=s.end_frame {
            covered[(f - first) as usize] = true;
        }
    }
    let mut run: Option<u32> = None;
    let mut found = Vec::new();
    for (i, frame) in ctx.ego.frames().enumerate() {
        let hit = ctx.leader(frame).is_none() || !covered[i];
        match (hit, run) {
            (true, None) => run = Some(frame),
            (false, Some(s)) => {
                found.push((s, frame - 1));
                run = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run {
        found.push((s, ctx.ego.last_frame()));
    }
    for (s, e) in found {
        out.push(Scenario {
            category: ScenarioClass::NoLeadingVehicle,
            recording: ctx.ego.recording,
            ego: ctx.ego.ego,
            start_frame: s,
            end_frame: e,
            main_actors: BTreeSet::new(),
            actors: visible_between(ctx.ego, s, e),
            tags: BTreeSet::new(),
        });
    }
}

/// All scenarios of one ego dataset in canonical order (category, start
/// frame, main actors). Tags are left empty.
pub fn mine_scenarios(ego: &EgoDataset, acts: &ActivityIndex, cfg: &MiningConfig) -> Vec<Scenario> {
    let ctx = Ctx {
        ego,
        acts,
        cfg,
        ego_acts: acts.get(ego.ego),
    };
    let actors = ego.actor_ids();
    let mut out = Vec::new();
    for c in [
        ScenarioCategory::C1,
        ScenarioCategory::C2,
        ScenarioCategory::C3,
        ScenarioCategory::C4,
    ] {
        if cfg.enabled(c) {
            mine_state_category(&ctx, c, &mut out);
        }
    }
    if cfg.enabled(ScenarioCategory::C5) {
        mine_cut_in(&ctx, &actors, &mut out);
    }
    if cfg.enabled(ScenarioCategory::C6) {
        mine_cut_out(&ctx, &actors, &mut out);
    }
    mine_ego_lane_changes(&ctx, &mut out);
    if cfg.enabled(ScenarioCategory::C9) || cfg.enabled(ScenarioCategory::C10) {
        mine_overtaking(&ctx, &actors, &mut out);
    }

    // event categories use their own minimum duration
    let fr = ego.frame_rate;
    out.retain(|s| match s.category.category() {
        Some(c) => s.frame_count() >= cfg.min_frames(c, fr),
        None => true,
    });
    if cfg.catch_all {
        mine_catch_all(&ctx, &mut out);
    }
    out.sort_by_key(Scenario::sort_key);
    out.dedup_by(|a, b| a.sort_key() == b.sort_key());
    out
}

pub fn leading_vehicle_at(ego: &EgoDataset, frame: u32) -> Option<TrackId> {
    ego.leading_vehicle_at(frame).map(|a| a.actor)
}

/// Actors of `zone` at `frame`, used by detectors and tests alike.
pub fn actors_in_zone(ego: &EgoDataset, frame: u32, zone: RelativeZone) -> Vec<TrackId> {
    ego.visible_at(frame)
        .iter()
        .filter(|a| a.zone == zone)
        .map(|a| a.actor)
        .collect()
}
