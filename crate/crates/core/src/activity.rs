//! Activity segmentation of tracks and relative-zone classification.

use serde::{Deserialize, Serialize};

use crate::model::{lane_of, Direction, LaneLayout, Side, Track, TrackId, TrackState};

/// Thresholds of the activity segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActivityConfig {
    /// Minimum speed change (m/s) for an accelerating/decelerating segment.
    pub dv_min: f64,
    /// Width (s) of the centered moving average applied to the speed.
    pub smoothing_window: f64,
    /// |dv/dt| (m/s^2) below which the smoothed speed counts as flat.
    pub flat_acceleration: f64,
    /// |vy| (m/s) at which a lane change is considered settled.
    pub vy_settle: f64,
    /// Maximum extent (s) of a lane change on each side of the crossing.
    pub lane_change_cap: f64,
}

impl Default for ActivityConfig {
    fn default() -> Self {
        ActivityConfig {
            dv_min: 1.0,
            smoothing_window: 0.5,
            flat_acceleration: 0.1,
            vy_settle: 0.1,
            lane_change_cap: 5.0,
        }
    }
}

impl ActivityConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("dv_min", self.dv_min),
            ("vy_settle", self.vy_settle),
            ("lane_change_cap", self.lane_change_cap),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(format!("activity.{name} must be > 0, got {v}"));
            }
        }
        if !(self.smoothing_window >= 0.0) || !(self.flat_acceleration >= 0.0) {
            return Err("activity.smoothing_window and activity.flat_acceleration must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LongitudinalKind {
    Cruising,
    Accelerating,
    Decelerating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LateralKind {
    KeepLane,
    ChangeLeft,
    ChangeRight,
}

impl LateralKind {
    pub fn is_change(self) -> bool {
        self != LateralKind::KeepLane
    }

    pub fn side(self) -> Option<Side> {
        match self {
            LateralKind::KeepLane => None,
            LateralKind::ChangeLeft => Some(Side::Left),
            LateralKind::ChangeRight => Some(Side::Right),
        }
    }

    pub fn mirrored(self) -> LateralKind {
        match self {
            LateralKind::KeepLane => LateralKind::KeepLane,
            LateralKind::ChangeLeft => LateralKind::ChangeRight,
            LateralKind::ChangeRight => LateralKind::ChangeLeft,
        }
    }
}

/// A maximal stretch of one activity kind; frames are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivitySegment<K> {
    pub actor: TrackId,
    pub kind: K,
    pub start_frame: u32,
    pub end_frame: u32,
}

impl<K> ActivitySegment<K> {
    pub fn contains(&self, frame: u32) -> bool {
        self.start_frame <= frame && frame <= self.end_frame
    }

    pub fn overlaps(&self, start: u32, end: u32) -> bool {
        self.start_frame <= end && start <= self.end_frame
    }
}

fn half_window(cfg: &ActivityConfig, frame_rate: f64) -> usize {
    (cfg.smoothing_window * frame_rate / 2.0).round().max(0.0) as usize
}

/// Longitudinal speed smoothed with a centered moving average (window
/// truncated at the track ends).
pub fn smoothed_speed(track: &Track, cfg: &ActivityConfig, frame_rate: f64) -> Vec<f64> {
    let speeds: Vec<f64> = track.states.iter().map(|s| s.vx).collect();
    moving_average(&speeds, half_window(cfg, frame_rate))
}

fn moving_average(values: &[f64], half: usize) -> Vec<f64> {
    let n = values.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1) as f64
        })
        .collect()
}

fn slope_sign(speed: &[f64], i: usize, dt: f64, flat: f64) -> i8 {
    let n = speed.len();
    let d = if n < 2 {
        0.0
    } else if i == 0 {
        (speed[1] - speed[0]) / dt
    } else if i == n - 1 {
        (speed[n - 1] - speed[n - 2]) / dt
    } else {
        (speed[i + 1] - speed[i - 1]) / (2.0 * dt)
    };
    if d > flat {
        1
    } else if d < -flat {
        -1
    } else {
        0
    }
}

/// Splits the track at the extrema and plateau edges of its smoothed speed;
/// each piece is accelerating (decelerating) when its speed change is at
/// least `+dv_min` (at most `-dv_min`), cruising otherwise. Adjacent pieces of
/// the same kind are merged.
pub fn segment_longitudinal(
    track: &Track,
    cfg: &ActivityConfig,
    frame_rate: f64,
) -> Vec<ActivitySegment<LongitudinalKind>> {
    let n = track.states.len();
    if n == 0 {
        return Vec::new();
    }
    let speed = smoothed_speed(track, cfg, frame_rate);
    let dt = 1.0 / frame_rate;
    let first = track.first_frame();

    let mut segments: Vec<ActivitySegment<LongitudinalKind>> = Vec::new();
    let mut start = 0usize;
    let mut sign = slope_sign(&speed, 0, dt, cfg.flat_acceleration);
    for i in 1..=n {
        let next = if i < n {
            Some(slope_sign(&speed, i, dt, cfg.flat_acceleration))
        } else {
            None
        };
        if next == Some(sign) {
            continue;
        }
        let end = i - 1;
        let dv = speed[end] - speed[start];
        let kind = if dv >= cfg.dv_min {
            LongitudinalKind::Accelerating
        } else if dv <= -cfg.dv_min {
            LongitudinalKind::Decelerating
        } else {
            LongitudinalKind::Cruising
        };
        let (s, e) = (first + start as u32, first + end as u32);
        match segments.last_mut() {
            Some(last) if last.kind == kind => last.end_frame = e,
            _ => segments.push(ActivitySegment {
                actor: track.id,
                kind,
                start_frame: s,
                end_frame: e,
            }),
        }
        if let Some(next) = next {
            sign = next;
            start = i;
        }
    }
    segments
}

/// Lane-keeping / lane-change segmentation driven by lane id changes.
///
/// Each crossing yields one change segment reaching out to the nearest frames
/// with `|vy| < vy_settle`, at most `lane_change_cap` seconds on either side.
/// Overlapping neighbours are split at the `|vy|` minimum between their
/// crossings.
pub fn segment_lateral(
    track: &Track,
    layout: &LaneLayout,
    cfg: &ActivityConfig,
    frame_rate: f64,
) -> Vec<ActivitySegment<LateralKind>> {
    let states = &track.states;
    let n = states.len();
    if n == 0 {
        return Vec::new();
    }
    let lanes = layout.lanes(track.direction);
    let cap = (cfg.lane_change_cap * frame_rate).round() as usize;
    let settled = |i: usize| states[i].vy.abs() < cfg.vy_settle;

    // (crossing index, kind, start, end) with indices into `states`
    let mut changes: Vec<(usize, LateralKind, usize, usize)> = Vec::new();
    for c in 1..n {
        let (prev, cur) = (&states[c - 1], &states[c]);
        if prev.lane_id == cur.lane_id {
            continue;
        }
        let to_left = match (lanes.index_of(prev.lane_id), lanes.index_of(cur.lane_id)) {
            (Some(a), Some(b)) => b > a,
            _ => cur.y > prev.y,
        };
        let kind = if to_left {
            LateralKind::ChangeLeft
        } else {
            LateralKind::ChangeRight
        };
        let lo = c.saturating_sub(cap);
        let start = (lo..c).rev().find(|&j| settled(j)).unwrap_or(lo);
        let hi = (c + cap).min(n - 1);
        let end = (c..=hi).find(|&j| settled(j)).unwrap_or(hi);
        changes.push((c, kind, start, end));
    }
    for k in 1..changes.len() {
        let (c_prev, c_next) = (changes[k - 1].0, changes[k].0);
        if changes[k - 1].3 >= changes[k].2 {
            let m = (c_prev..c_next)
                .min_by(|&a, &b| states[a].vy.abs().total_cmp(&states[b].vy.abs()))
                .unwrap_or(c_prev);
            changes[k - 1].3 = m;
            changes[k].2 = m + 1;
        }
    }

    let first = track.first_frame();
    let seg = |kind, s: usize, e: usize| ActivitySegment {
        actor: track.id,
        kind,
        start_frame: first + s as u32,
        end_frame: first + e as u32,
    };
    let mut out = Vec::with_capacity(2 * changes.len() + 1);
    let mut cursor = 0usize;
    for &(_, kind, s, e) in &changes {
        if s > cursor {
            out.push(seg(LateralKind::KeepLane, cursor, s - 1));
        }
        out.push(seg(kind, s, e));
        cursor = e + 1;
    }
    if cursor < n {
        out.push(seg(LateralKind::KeepLane, cursor, n - 1));
    }
    out
}

/// Both segmentations of one track plus per-frame label lookups.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackActivities {
    pub track: TrackId,
    pub first_frame: u32,
    pub longitudinal: Vec<ActivitySegment<LongitudinalKind>>,
    pub lateral: Vec<ActivitySegment<LateralKind>>,
    long_labels: Vec<LongitudinalKind>,
    lat_index: Vec<u32>,
}

impl TrackActivities {
    pub fn compute(track: &Track, layout: &LaneLayout, cfg: &ActivityConfig, frame_rate: f64) -> Self {
        let longitudinal = segment_longitudinal(track, cfg, frame_rate);
        let lateral = segment_lateral(track, layout, cfg, frame_rate);
        let n = track.states.len();
        let first = track.first_frame();
        let mut long_labels = vec![LongitudinalKind::Cruising; n];
        for s in &longitudinal {
            for f in s.start_frame..=s.end_frame {
                long_labels[(f - first) as usize] = s.kind;
            }
        }
        let mut lat_index = vec![0u32; n];
        for (k, s) in lateral.iter().enumerate() {
            for f in s.start_frame..=s.end_frame {
                lat_index[(f - first) as usize] = k as u32;
            }
        }
        TrackActivities {
            track: track.id,
            first_frame: first,
            longitudinal,
            lateral,
            long_labels,
            lat_index,
        }
    }

    fn offset(&self, frame: u32) -> Option<usize> {
        let i = frame.checked_sub(self.first_frame)? as usize;
        (i < self.long_labels.len()).then_some(i)
    }

    pub fn longitudinal_at(&self, frame: u32) -> Option<LongitudinalKind> {
        self.offset(frame).map(|i| self.long_labels[i])
    }

    pub fn lateral_segment_at(&self, frame: u32) -> Option<&ActivitySegment<LateralKind>> {
        self.offset(frame)
            .map(|i| &self.lateral[self.lat_index[i] as usize])
    }

    pub fn lateral_at(&self, frame: u32) -> Option<LateralKind> {
        self.lateral_segment_at(frame).map(|s| s.kind)
    }

    /// True when the track exists and keeps its lane over the whole range.
    pub fn keeps_lane_over(&self, start: u32, end: u32) -> bool {
        match (self.lateral_segment_at(start), self.offset(end)) {
            (Some(seg), Some(_)) => seg.kind == LateralKind::KeepLane && seg.end_frame >= end,
            _ => false,
        }
    }
}

/// Position of an actor relative to the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelativeZone {
    SameLaneFront,
    SameLaneRear,
    FrontLeft,
    FrontRight,
    SideLeft,
    SideRight,
    RearLeft,
    RearRight,
    None,
}

impl RelativeZone {
    pub fn mirrored(self) -> RelativeZone {
        use RelativeZone::*;
        match self {
            FrontLeft => FrontRight,
            FrontRight => FrontLeft,
            SideLeft => SideRight,
            SideRight => SideLeft,
            RearLeft => RearRight,
            RearRight => RearLeft,
            other => other,
        }
    }

    pub fn is_front(self) -> bool {
        matches!(
            self,
            RelativeZone::SameLaneFront | RelativeZone::FrontLeft | RelativeZone::FrontRight
        )
    }

    pub fn is_rear_on(self, side: Side) -> bool {
        matches!(
            (self, side),
            (RelativeZone::RearLeft, Side::Left) | (RelativeZone::RearRight, Side::Right)
        )
    }
}

/// Longitudinal half-extent used for the front/side/rear split: half the sum
/// of both vehicle lengths (bounding boxes overlap longitudinally inside it).
pub fn side_extent(ego_length: f64, actor_length: f64) -> f64 {
    (ego_length + actor_length) / 2.0
}

/// Zone from lane indices and longitudinal offset `dx` (actor minus ego).
pub fn zone_from_lanes(
    ego_lane: Option<usize>,
    actor_lane: Option<usize>,
    dx: f64,
    x_side: f64,
) -> RelativeZone {
    let (Some(e), Some(a)) = (ego_lane, actor_lane) else {
        return RelativeZone::None;
    };
    if a == e {
        return if dx >= 0.0 {
            RelativeZone::SameLaneFront
        } else {
            RelativeZone::SameLaneRear
        };
    }
    let left = a > e;
    match (dx > x_side, dx < -x_side, left) {
        (true, _, true) => RelativeZone::FrontLeft,
        (true, _, false) => RelativeZone::FrontRight,
        (_, true, true) => RelativeZone::RearLeft,
        (_, true, false) => RelativeZone::RearRight,
        (false, false, true) => RelativeZone::SideLeft,
        (false, false, false) => RelativeZone::SideRight,
    }
}

/// Zone of `actor` seen from `ego` (same frame, same carriageway). Lanes
/// beyond the adjacent one fall into the same left/right groups.
pub fn classify_zone(
    ego: &TrackState,
    actor: &TrackState,
    direction: Direction,
    layout: &LaneLayout,
    x_side: f64,
) -> RelativeZone {
    zone_from_lanes(
        lane_of(ego.y, direction, layout),
        lane_of(actor.y, direction, layout),
        actor.x - ego.x,
        x_side,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DirectionLanes, VehicleClass};
    use proptest::prelude::*;

    const FR: f64 = 25.0;

    fn layout() -> LaneLayout {
        let lanes = DirectionLanes {
            boundaries: vec![0.0, 4.0, 8.0, 12.0],
            lane_ids: vec![10, 11, 12],
        };
        LaneLayout {
            upper: lanes.clone(),
            lower: lanes,
        }
    }

    fn track_from(speeds: &[f64], lateral: &[(f64, f64, i32)]) -> Track {
        let n = speeds.len().max(lateral.len());
        let states = (0..n)
            .map(|i| {
                let (y, vy, lane_id) = lateral.get(i).copied().unwrap_or((2.0, 0.0, 10));
                TrackState {
                    frame: 1 + i as u32,
                    x: 0.0,
                    y,
                    vx: speeds.get(i).copied().unwrap_or(30.0),
                    vy,
                    ax: 0.0,
                    ay: 0.0,
                    lane_id,
                }
            })
            .collect();
        Track {
            id: TrackId(1),
            class: VehicleClass::Car,
            direction: Direction::Lower,
            length: 4.5,
            width: 2.0,
            states,
        }
    }

    /// Scalar restatement of the longitudinal rule, written independently of
    /// the implementation (direct window sums, explicit run list).
    #[allow(clippy::needless_range_loop)]
    fn reference_longitudinal(speeds: &[f64], cfg: &ActivityConfig) -> Vec<(LongitudinalKind, usize, usize)> {
        let n = speeds.len();
        let half = (cfg.smoothing_window * FR / 2.0).round() as usize;
        let mut smooth = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(half);
            let hi = if i + half < n { i + half } else { n - 1 };
            let mut sum = 0.0;
            for v in &speeds[lo..=hi] {
                sum += v;
            }
            smooth[i] = sum / (hi - lo + 1) as f64;
        }
        let dt = 1.0 / FR;
        let mut labels = vec![0i8; n];
        for i in 0..n {
            let d = if n < 2 {
                0.0
            } else if i == 0 {
                (smooth[1] - smooth[0]) / dt
            } else if i == n - 1 {
                (smooth[n - 1] - smooth[n - 2]) / dt
            } else {
                (smooth[i + 1] - smooth[i - 1]) / (2.0 * dt)
            };
            labels[i] = if d > cfg.flat_acceleration {
                1
            } else if d < -cfg.flat_acceleration {
                -1
            } else {
                0
            };
        }
        let mut runs = Vec::new();
        let mut s = 0;
        for i in 1..=n {
            if i == n || labels[i] != labels[s] {
                runs.push((s, i - 1));
                s = i;
            }
        }
        let mut out: Vec<(LongitudinalKind, usize, usize)> = Vec::new();
        for (a, b) in runs {
            let dv = smooth[b] - smooth[a];
            let kind = if dv >= cfg.dv_min {
                LongitudinalKind::Accelerating
            } else if dv <= -cfg.dv_min {
                LongitudinalKind::Decelerating
            } else {
                LongitudinalKind::Cruising
            };
            if let Some(last) = out.last_mut() {
                if last.0 == kind {
                    last.2 = b;
                    continue;
                }
            }
            out.push((kind, a, b));
        }
        out
    }

    fn as_tuples(segs: &[ActivitySegment<LongitudinalKind>]) -> Vec<(LongitudinalKind, usize, usize)> {
        segs.iter()
            .map(|s| (s.kind, (s.start_frame - 1) as usize, (s.end_frame - 1) as usize))
            .collect()
    }

    #[test]
    fn constant_speed_is_one_cruising_segment() {
        let t = track_from(&[30.0; 200], &[]);
        let segs = segment_longitudinal(&t, &ActivityConfig::default(), FR);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].kind, LongitudinalKind::Cruising);
        assert_eq!((segs[0].start_frame, segs[0].end_frame), (1, 200));
    }

    #[test]
    fn ramp_then_constant_matches_reference() {
        // 20 -> 26 m/s over 5 s, then 5 s constant
        let speeds: Vec<f64> = (0..250)
            .map(|i| {
                let t = i as f64 / FR;
                if t < 5.0 { 20.0 + 1.2 * t } else { 26.0 }
            })
            .collect();
        let cfg = ActivityConfig::default();
        let segs = segment_longitudinal(&track_from(&speeds, &[]), &cfg, FR);
        let kinds: Vec<_> = segs.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, vec![LongitudinalKind::Accelerating, LongitudinalKind::Cruising]);
        assert_eq!(as_tuples(&segs), reference_longitudinal(&speeds, &cfg));
        // boundary lands at the end of the ramp within the smoothing half-width
        let boundary = segs[1].start_frame as f64 - 1.0;
        assert!((boundary / FR - 5.0).abs() <= 0.25, "boundary at {boundary}");
    }

    #[test]
    fn small_oscillation_stays_cruising() {
        let speeds: Vec<f64> = (0..500)
            .map(|i| 25.0 + 0.3 * (2.0 * std::f64::consts::PI * i as f64 / (4.0 * FR)).sin())
            .collect();
        let cfg = ActivityConfig::default();
        let segs = segment_longitudinal(&track_from(&speeds, &[]), &cfg, FR);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].kind, LongitudinalKind::Cruising);
        assert_eq!(as_tuples(&segs), reference_longitudinal(&speeds, &cfg));
    }

    fn check_tiling<K>(segs: &[ActivitySegment<K>], first: u32, last: u32) {
        assert_eq!(segs.first().unwrap().start_frame, first);
        assert_eq!(segs.last().unwrap().end_frame, last);
        for w in segs.windows(2) {
            assert_eq!(w[1].start_frame, w[0].end_frame + 1);
        }
        for s in segs {
            assert!(s.start_frame <= s.end_frame);
        }
    }

    proptest! {
        #[test]
        fn longitudinal_matches_reference_and_tiles(
            base in 10.0f64..35.0,
            steps in proptest::collection::vec(-0.2f64..0.2, 1..400),
        ) {
            let mut v = base;
            let speeds: Vec<f64> = steps.iter().map(|d| { v += d; v }).collect();
            let cfg = ActivityConfig::default();
            let track = track_from(&speeds, &[]);
            let segs = segment_longitudinal(&track, &cfg, FR);
            prop_assert_eq!(as_tuples(&segs), reference_longitudinal(&speeds, &cfg));
            check_tiling(&segs, 1, speeds.len() as u32);
            let smooth = smoothed_speed(&track, &cfg, FR);
            for s in &segs {
                let dv = smooth[(s.end_frame - 1) as usize] - smooth[(s.start_frame - 1) as usize];
                match s.kind {
                    LongitudinalKind::Accelerating => prop_assert!(dv >= cfg.dv_min),
                    LongitudinalKind::Decelerating => prop_assert!(dv <= -cfg.dv_min),
                    LongitudinalKind::Cruising => {}
                }
            }
        }

        #[test]
        fn lateral_tiles_and_mirrors(
            crossings in proptest::collection::btree_set(5usize..295, 0..5),
            noise in proptest::collection::vec(-0.5f64..0.5, 300),
        ) {
            // lane index walks up/down at each crossing, staying within 0..3
            let mut lane = 1i32;
            let mut up = true;
            let lateral: Vec<(f64, f64, i32)> = (0..300)
                .map(|i| {
                    if crossings.contains(&i) {
                        if lane == 2 { up = false } else if lane == 0 { up = true }
                        lane += if up { 1 } else { -1 };
                    }
                    (4.0 * lane as f64 + 2.0, noise[i], 10 + lane)
                })
                .collect();
            let track = track_from(&[], &lateral);
            let cfg = ActivityConfig::default();
            let segs = segment_lateral(&track, &layout(), &cfg, FR);
            check_tiling(&segs, 1, 300);
            let n_changes = segs.iter().filter(|s| s.kind.is_change()).count();
            prop_assert_eq!(n_changes, crossings.len());

            // mirror: reflect y/vy and reverse lane indices
            let mirrored_layout = layout().mirrored();
            let mut mirrored = track.clone();
            for s in &mut mirrored.states {
                s.y = -s.y;
                s.vy = -s.vy;
                s.lane_id = 10 + (2 - (s.lane_id - 10));
            }
            let msegs = segment_lateral(&mirrored, &mirrored_layout, &cfg, FR);
            prop_assert_eq!(msegs.len(), segs.len());
            for (a, b) in segs.iter().zip(&msegs) {
                prop_assert_eq!(a.kind.mirrored(), b.kind);
                prop_assert_eq!((a.start_frame, a.end_frame), (b.start_frame, b.end_frame));
            }
        }
    }

    /// Raised-cosine lane changes of `width` over `duration` seconds; `changes` = (start, sign).
    fn lane_change_profile(n: usize, duration: f64, width: f64, changes: &[(f64, f64)]) -> Vec<(f64, f64, i32)> {
        (0..n)
            .map(|i| {
                let t = i as f64 / FR;
                let mut y = 2.0;
                let mut vy = 0.0;
                for &(start, sign) in changes {
                    let u = ((t - start) / duration).clamp(0.0, 1.0);
                    y += sign * width * (1.0 - (std::f64::consts::PI * u).cos()) / 2.0;
                    if u > 0.0 && u < 1.0 {
                        vy += sign * width * std::f64::consts::PI / (2.0 * duration)
                            * (std::f64::consts::PI * u).sin();
                    }
                }
                let lane = crate::model::lane_index(y, &[0.0, 4.0, 8.0, 12.0]).unwrap() as i32;
                (y, vy, 10 + lane)
            })
            .collect()
    }

    #[test]
    fn smooth_single_lane_change_left() {
        let lateral = lane_change_profile(500, 4.0, 4.0, &[(6.0, 1.0)]);
        let track = track_from(&[], &lateral);
        let segs = segment_lateral(&track, &layout(), &ActivityConfig::default(), FR);
        let kinds: Vec<_> = segs.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![LateralKind::KeepLane, LateralKind::ChangeLeft, LateralKind::KeepLane]
        );
        // crossing at the midpoint (t = 8 s -> frame index 200)
        let crossing = 1 + (1..500).find(|&i| lateral[i].2 != lateral[i - 1].2).unwrap() as u32;
        assert!(segs[1].contains(crossing));
        // rule by hand: |vy| = (pi w / 2T) sin(pi u) < 0.1  <=>  sin(pi u) < 0.0637,
        // i.e. within 0.081 s of either end of the 6..10 s manoeuvre
        let start_t = (segs[1].start_frame - 1) as f64 / FR;
        let end_t = (segs[1].end_frame - 1) as f64 / FR;
        assert!((start_t - 6.0).abs() <= 0.1, "start {start_t}");
        assert!((end_t - 10.0).abs() <= 0.1, "end {end_t}");
    }

    #[test]
    fn back_to_back_changes_share_boundary_at_vy_minimum() {
        // two left changes at 6 s and 8 s, each 4 s long: vy never settles in between
        let lateral = lane_change_profile(600, 4.0, 4.0, &[(6.0, 1.0), (8.0, 1.0)]);
        let track = track_from(&[], &lateral);
        let segs = segment_lateral(&track, &layout(), &ActivityConfig::default(), FR);
        let changes: Vec<_> = segs.iter().filter(|s| s.kind.is_change()).collect();
        assert_eq!(changes.len(), 2);
        assert_eq!(changes[0].kind, LateralKind::ChangeLeft);
        assert_eq!(changes[1].kind, LateralKind::ChangeLeft);
        assert_eq!(changes[1].start_frame, changes[0].end_frame + 1);
        // brute force: |vy| minimum between the two crossings
        let crossings: Vec<usize> = (1..600).filter(|&i| lateral[i].2 != lateral[i - 1].2).collect();
        assert_eq!(crossings.len(), 2);
        let m = (crossings[0]..crossings[1])
            .min_by(|&a, &b| lateral[a].1.abs().total_cmp(&lateral[b].1.abs()))
            .unwrap();
        assert_eq!(changes[0].end_frame, 1 + m as u32);
    }

    #[test]
    fn track_without_lane_change_keeps_lane() {
        let track = track_from(&[30.0; 100], &[]);
        let segs = segment_lateral(&track, &layout(), &ActivityConfig::default(), FR);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].kind, LateralKind::KeepLane);
    }

    #[test]
    fn lateral_cap_limits_unsettled_change() {
        // vy never below the settle threshold
        let lateral: Vec<(f64, f64, i32)> = (0..600)
            .map(|i| if i < 300 { (3.0, 0.5, 10) } else { (5.0, 0.5, 11) })
            .collect();
        let segs = segment_lateral(&track_from(&[], &lateral), &layout(), &ActivityConfig::default(), FR);
        let change = segs.iter().find(|s| s.kind.is_change()).unwrap();
        // crossing at index 300; cap 125 frames each side
        assert_eq!(change.start_frame, 1 + 175);
        assert_eq!(change.end_frame, 1 + 425);
    }

    #[test]
    fn zones_from_examples() {
        let lay = layout();
        let st = |x: f64, y: f64| TrackState {
            frame: 1,
            x,
            y,
            vx: 30.0,
            vy: 0.0,
            ax: 0.0,
            ay: 0.0,
            lane_id: 10,
        };
        let ego = st(100.0, 6.0);
        assert_eq!(classify_zone(&ego, &st(140.0, 6.0), Direction::Lower, &lay, 4.5), RelativeZone::SameLaneFront);
        assert_eq!(classify_zone(&ego, &st(101.0, 10.0), Direction::Lower, &lay, 5.0), RelativeZone::SideLeft);
        let ego_top = st(100.0, 10.0);
        assert_eq!(classify_zone(&ego_top, &st(70.0, 2.0), Direction::Lower, &lay, 4.5), RelativeZone::RearRight);
        assert_eq!(classify_zone(&ego, &st(99.0, 6.0), Direction::Lower, &lay, 4.5), RelativeZone::SameLaneRear);
        assert_eq!(classify_zone(&ego, &st(99.0, 13.0), Direction::Lower, &lay, 4.5), RelativeZone::None);
    }

    /// Every combination of lane relation and longitudinal band, enumerated.
    #[test]
    fn zone_brute_force_table() {
        let x_side = 5.0;
        for ego_lane in 0..4usize {
            for actor_lane in 0..4usize {
                for dx in [-50.0, -5.0001, -5.0, -1.0, 0.0, 1.0, 5.0, 5.0001, 50.0] {
                    let z = zone_from_lanes(Some(ego_lane), Some(actor_lane), dx, x_side);
                    let expected = if actor_lane == ego_lane {
                        if dx >= 0.0 { RelativeZone::SameLaneFront } else { RelativeZone::SameLaneRear }
                    } else {
                        let left = actor_lane > ego_lane;
                        let band = if dx > x_side { 0 } else if dx < -x_side { 2 } else { 1 };
                        [
                            [RelativeZone::FrontRight, RelativeZone::SideRight, RelativeZone::RearRight],
                            [RelativeZone::FrontLeft, RelativeZone::SideLeft, RelativeZone::RearLeft],
                        ][left as usize][band]
                    };
                    assert_eq!(z, expected, "ego {ego_lane} actor {actor_lane} dx {dx}");
                    // mirror: lanes reversed, same dx
                    let m = zone_from_lanes(Some(3 - ego_lane), Some(3 - actor_lane), dx, x_side);
                    assert_eq!(m, z.mirrored());
                }
            }
        }
    }

    #[test]
    fn activities_lookup() {
        let speeds: Vec<f64> = (0..250)
            .map(|i| if i < 125 { 20.0 + 1.2 * i as f64 / FR } else { 26.0 })
            .collect();
        let lateral = lane_change_profile(250, 4.0, 4.0, &[(2.0, 1.0)]);
        let track = track_from(&speeds, &lateral);
        let acts = TrackActivities::compute(&track, &layout(), &ActivityConfig::default(), FR);
        assert_eq!(acts.longitudinal_at(1), Some(LongitudinalKind::Accelerating));
        assert_eq!(acts.longitudinal_at(250), Some(LongitudinalKind::Cruising));
        assert_eq!(acts.longitudinal_at(251), None);
        assert_eq!(acts.lateral_at(1), Some(LateralKind::KeepLane));
        assert_eq!(acts.lateral_at(100), Some(LateralKind::ChangeLeft));
        assert!(acts.keeps_lane_over(1, 40));
        assert!(!acts.keeps_lane_over(1, 100));
        assert!(acts.keeps_lane_over(200, 250));
        assert!(!acts.keeps_lane_over(200, 251));
    }
}
