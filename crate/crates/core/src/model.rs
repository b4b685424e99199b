//! Shared domain types: recordings, tracks, lane geometry, scenarios and tags.
//!
//! All positions live in a direction-normalized frame: `+x` is the travel
//! direction of the vehicle's carriageway and `+y` points to the driver's
//! left. In that frame the median is always on the `+y` side, so lane index
//! `0` is the rightmost lane and indices grow towards the median.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordingId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrackId(pub u32);

impl fmt::Display for RecordingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}", self.0)
    }
}

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifies one ego dataset across a whole corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EgoKey {
    pub recording: RecordingId,
    pub ego: TrackId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VehicleClass {
    Car,
    Truck,
}

impl VehicleClass {
    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Car => "Car",
            VehicleClass::Truck => "Truck",
        }
    }
}

/// HighD's two carriageways: `Upper` drives towards image `-x`, `Lower` towards `+x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Upper,
    Lower,
}

/// Which side of the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn mirrored(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Kinematic state of one vehicle at one frame (vehicle center, normalized frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackState {
    pub frame: u32,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub ax: f64,
    pub ay: f64,
    pub lane_id: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: TrackId,
    pub class: VehicleClass,
    pub direction: Direction,
    /// Extent along the travel direction (m).
    pub length: f64,
    /// Lateral extent (m).
    pub width: f64,
    pub states: Vec<TrackState>,
}

impl Track {
    pub fn first_frame(&self) -> u32 {
        self.states.first().map_or(0, |s| s.frame)
    }

    pub fn last_frame(&self) -> u32 {
        self.states.last().map_or(0, |s| s.frame)
    }

    /// State at `frame`, relying on the no-gap invariant.
    pub fn state_at(&self, frame: u32) -> Option<&TrackState> {
        let first = self.first_frame();
        if frame < first {
            return None;
        }
        self.states.get((frame - first) as usize)
    }

    /// Arc length of the center path, summed over consecutive frames.
    pub fn traveled_distance(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum()
    }
}

/// Lanes of one carriageway in the normalized frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionLanes {
    /// Lane-marking offsets, strictly increasing (rightmost marking first).
    pub boundaries: Vec<f64>,
    /// Dataset lane id of each lane, `lane_ids[i]` lies between `boundaries[i]` and `boundaries[i + 1]`.
    pub lane_ids: Vec<i32>,
}

impl DirectionLanes {
    pub fn lane_count(&self) -> usize {
        self.boundaries.len().saturating_sub(1)
    }

    pub fn index_of(&self, lane_id: i32) -> Option<usize> {
        self.lane_ids.iter().position(|&id| id == lane_id)
    }

    fn is_valid(&self) -> bool {
        self.boundaries.len() >= 2
            && self.boundaries.windows(2).all(|w| w[0] < w[1])
            && self.lane_ids.len() == self.lane_count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneLayout {
    pub upper: DirectionLanes,
    pub lower: DirectionLanes,
}

impl LaneLayout {
    /// Builds the layout from HighD lane-marking lists given in image `y`
    /// coordinates (each list ascending). Lane ids follow the dataset rule of
    /// numbering lanes by their position in the concatenated marking list.
    pub fn from_highd_markings(upper: &[f64], lower: &[f64]) -> LaneLayout {
        let n_upper = upper.len() as i32;
        let n_lower = lower.len() as i32;
        // upper: y_norm = y_image, so ascending order is kept
        let upper_lanes = DirectionLanes {
            boundaries: upper.to_vec(),
            lane_ids: (0..n_upper.saturating_sub(1)).map(|i| i + 2).collect(),
        };
        // lower: y_norm = -y_image, so the list is reversed
        let lower_lanes = DirectionLanes {
            boundaries: lower.iter().rev().map(|y| -y).collect(),
            lane_ids: (0..n_lower.saturating_sub(1))
                .map(|i| n_upper + n_lower - i)
                .collect(),
        };
        LaneLayout {
            upper: upper_lanes,
            lower: lower_lanes,
        }
    }

    /// Inverse of [`LaneLayout::from_highd_markings`].
    pub fn to_highd_markings(&self) -> (Vec<f64>, Vec<f64>) {
        let upper = self.upper.boundaries.clone();
        let lower = self.lower.boundaries.iter().rev().map(|y| -y).collect();
        (upper, lower)
    }

    pub fn lanes(&self, direction: Direction) -> &DirectionLanes {
        match direction {
            Direction::Upper => &self.upper,
            Direction::Lower => &self.lower,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.upper.is_valid() && self.lower.is_valid()
    }

    pub fn contains_lane_id(&self, direction: Direction, lane_id: i32) -> bool {
        self.lanes(direction).index_of(lane_id).is_some()
    }

    /// Reflection across the road axis (`y -> -y` in the normalized frame).
    /// Each lane keeps its dataset id but moves to the mirrored index.
    pub fn mirrored(&self) -> LaneLayout {
        fn flip(d: &DirectionLanes) -> DirectionLanes {
            DirectionLanes {
                boundaries: d.boundaries.iter().rev().map(|b| -b).collect(),
                lane_ids: d.lane_ids.clone(),
            }
        }
        LaneLayout {
            upper: flip(&self.upper),
            lower: flip(&self.lower),
        }
    }
}

/// Lane index (0 = rightmost) containing `lateral`, or `None` when off-road.
///
/// A point on an interior marking belongs to the lane nearer the median,
/// i.e. the one with the larger index.
pub fn lane_of(lateral: f64, direction: Direction, layout: &LaneLayout) -> Option<usize> {
    lane_index(lateral, &layout.lanes(direction).boundaries)
}

pub(crate) fn lane_index(lateral: f64, boundaries: &[f64]) -> Option<usize> {
    let n = boundaries.len();
    if n < 2 || !lateral.is_finite() {
        return None;
    }
    if lateral < boundaries[0] || lateral > boundaries[n - 1] {
        return None;
    }
    // number of markings at or below the position
    let at_or_below = boundaries.partition_point(|&b| b <= lateral);
    Some((at_or_below - 1).min(n - 2))
}

/// Signed lateral center distance from ego to actor, positive towards ego's left.
pub fn lateral_offset_between(ego: &TrackState, actor: &TrackState) -> f64 {
    actor.y - ego.y
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub id: RecordingId,
    pub location_id: u32,
    pub frame_rate: f64,
    /// Inclusive frame range of the recording.
    pub first_frame: u32,
    pub last_frame: u32,
    pub lane_layout: LaneLayout,
    pub tracks: Vec<Track>,
}

impl Recording {
    pub fn track(&self, id: TrackId) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }

    /// Reflects the recording across the road axis of each carriageway.
    pub fn mirrored(&self) -> Recording {
        let layout = self.lane_layout.mirrored();
        let tracks = self
            .tracks
            .iter()
            .map(|t| {
                let src = self.lane_layout.lanes(t.direction);
                let n = src.lane_count();
                let states = t
                    .states
                    .iter()
                    .map(|s| {
                        let lane_id = match src.index_of(s.lane_id) {
                            Some(i) => src.lane_ids[n - 1 - i],
                            None => s.lane_id,
                        };
                        TrackState {
                            y: -s.y,
                            vy: -s.vy,
                            ay: -s.ay,
                            lane_id,
                            ..*s
                        }
                    })
                    .collect();
                Track {
                    states,
                    ..t.clone()
                }
            })
            .collect();
        Recording {
            lane_layout: layout,
            tracks,
            ..self.clone()
        }
    }
}

/// The ten scenario categories of the highway experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScenarioCategory {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    C9,
    C10,
}

impl ScenarioCategory {
    pub const ALL: [ScenarioCategory; 10] = [
        ScenarioCategory::C1,
        ScenarioCategory::C2,
        ScenarioCategory::C3,
        ScenarioCategory::C4,
        ScenarioCategory::C5,
        ScenarioCategory::C6,
        ScenarioCategory::C7,
        ScenarioCategory::C8,
        ScenarioCategory::C9,
        ScenarioCategory::C10,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        ["C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10"][self.index()]
    }

    pub fn name(self) -> &'static str {
        use ScenarioCategory::*;
        match self {
            C1 => "Leading vehicle cruising",
            C2 => "Leading vehicle accelerating",
            C3 => "Leading vehicle decelerating",
            C4 => "Approaching slower vehicle",
            C5 => "Cut-in in front of ego vehicle",
            C6 => "Cut-out in front of ego vehicle",
            C7 => "Changing lane with vehicle behind",
            C8 => "Merging into an occupied lane",
            C9 => "Ego vehicle overtaking vehicle",
            C10 => "Vehicle overtaking ego vehicle",
        }
    }

    pub fn ego_activity(self) -> &'static str {
        use ScenarioCategory::*;
        match self {
            C7 | C8 => "Changing lane",
            _ => "Keeping lane",
        }
    }

    pub fn main_actor_activity(self) -> &'static str {
        use ScenarioCategory::*;
        match self {
            C1 => "Keeping lane and cruising",
            C2 => "Keeping lane and accelerating",
            C3 => "Keeping lane and decelerating",
            C4 => "Keeping lane and driving slower than ego vehicle",
            C5 => "Changing lane to become leading vehicle",
            C6 => "Leading ego vehicle and then changing lane",
            C7 => "Behind ego vehicle on adjacent lane",
            C8 => "Both main actors stay in lane and become leading and following vehicles after ego vehicle lane change",
            C9 => "Keeping lane on overtaken by ego vehicle on adjacent lane",
            C10 => "Keeping lane and overtaking ego vehicle on adjacent lane",
        }
    }

    /// Same category with left and right exchanged; every category is its own mirror.
    pub fn mirrored(self) -> Self {
        self
    }
}

impl fmt::Display for ScenarioCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown symbol `{0}`")]
pub struct UnknownSymbol(pub String);

impl FromStr for ScenarioCategory {
    type Err = UnknownSymbol;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioCategory::ALL
            .into_iter()
            .find(|c| c.symbol() == s.trim())
            .ok_or_else(|| UnknownSymbol(s.to_string()))
    }
}

/// Category of a mined scenario: one of the ten categories, or the
/// "ego vehicle has no leading vehicle" catch-all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScenarioClass {
    Category(ScenarioCategory),
    NoLeadingVehicle,
}

impl ScenarioClass {
    pub const NO_LEADER_SYMBOL: &'static str = "NL";

    pub fn symbol(self) -> &'static str {
        match self {
            ScenarioClass::Category(c) => c.symbol(),
            ScenarioClass::NoLeadingVehicle => Self::NO_LEADER_SYMBOL,
        }
    }

    pub fn category(self) -> Option<ScenarioCategory> {
        match self {
            ScenarioClass::Category(c) => Some(c),
            ScenarioClass::NoLeadingVehicle => None,
        }
    }
}

impl From<ScenarioCategory> for ScenarioClass {
    fn from(c: ScenarioCategory) -> Self {
        ScenarioClass::Category(c)
    }
}

impl FromStr for ScenarioClass {
    type Err = UnknownSymbol;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == Self::NO_LEADER_SYMBOL {
            return Ok(ScenarioClass::NoLeadingVehicle);
        }
        s.parse().map(ScenarioClass::Category)
    }
}

impl Serialize for ScenarioClass {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for ScenarioClass {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The eighteen scenario tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    Car,
    Truck,
    SameLaneFront,
    SameLaneRear,
    FrontLeft,
    FrontRight,
    SideLeft,
    SideRight,
    RearLeft,
    RearRight,
    Slower,
    Faster,
    Cruising,
    Accelerating,
    Decelerating,
    KeepingLane,
    ChangingLaneLeft,
    ChangingLaneRight,
}

impl Tag {
    pub const ALL: [Tag; 18] = [
        Tag::Car,
        Tag::Truck,
        Tag::SameLaneFront,
        Tag::SameLaneRear,
        Tag::FrontLeft,
        Tag::FrontRight,
        Tag::SideLeft,
        Tag::SideRight,
        Tag::RearLeft,
        Tag::RearRight,
        Tag::Slower,
        Tag::Faster,
        Tag::Cruising,
        Tag::Accelerating,
        Tag::Decelerating,
        Tag::KeepingLane,
        Tag::ChangingLaneLeft,
        Tag::ChangingLaneRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// `t1` .. `t18`.
    pub fn symbol(self) -> &'static str {
        [
            "t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8", "t9", "t10", "t11", "t12", "t13",
            "t14", "t15", "t16", "t17", "t18",
        ][self.index()]
    }

    pub fn definition(self) -> &'static str {
        use Tag::*;
        match self {
            Car => "Car",
            Truck => "Truck",
            SameLaneFront => "Same lane in front",
            SameLaneRear => "Same lane rear",
            FrontLeft => "In front left lane",
            FrontRight => "In front right lane",
            SideLeft => "At side left lane",
            SideRight => "At side right lane",
            RearLeft => "Rear left lane",
            RearRight => "Rear right lane",
            Slower => "Slower (dv < -5 m/s)",
            Faster => "Faster (dv > 5 m/s)",
            Cruising => "Cruising",
            Accelerating => "Accelerating",
            Decelerating => "Decelerating",
            KeepingLane => "Keeping lane",
            ChangingLaneLeft => "Changing lane left",
            ChangingLaneRight => "Changing lane right",
        }
    }

    /// Left/right counterpart (identity for side-free tags).
    pub fn mirrored(self) -> Tag {
        use Tag::*;
        match self {
            FrontLeft => FrontRight,
            FrontRight => FrontLeft,
            SideLeft => SideRight,
            SideRight => SideLeft,
            RearLeft => RearRight,
            RearRight => RearLeft,
            ChangingLaneLeft => ChangingLaneRight,
            ChangingLaneRight => ChangingLaneLeft,
            other => other,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Tag {
    type Err = UnknownSymbol;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Tag::ALL
            .into_iter()
            .find(|t| t.symbol() == s.trim())
            .ok_or_else(|| UnknownSymbol(s.to_string()))
    }
}

impl Serialize for Tag {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Serialize for ScenarioCategory {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for ScenarioCategory {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One mined scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub category: ScenarioClass,
    pub recording: RecordingId,
    pub ego: TrackId,
    /// Inclusive frame interval.
    pub start_frame: u32,
    pub end_frame: u32,
    /// Actors necessary for the scenario; empty only for the catch-all class.
    pub main_actors: BTreeSet<TrackId>,
    /// All actors visible during the interval (superset of `main_actors`).
    pub actors: BTreeSet<TrackId>,
    pub tags: BTreeSet<Tag>,
}

impl Scenario {
    pub fn ego_key(&self) -> EgoKey {
        EgoKey {
            recording: self.recording,
            ego: self.ego,
        }
    }

    pub fn contains_frame(&self, frame: u32) -> bool {
        self.start_frame <= frame && frame <= self.end_frame
    }

    pub fn frame_count(&self) -> u32 {
        self.end_frame - self.start_frame + 1
    }

    /// Interval ordering, main actors within actors, ego not among actors.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.start_frame > self.end_frame {
            return Err(format!(
                "start frame {} after end frame {}",
                self.start_frame, self.end_frame
            ));
        }
        if !self.main_actors.is_subset(&self.actors) {
            return Err("main actors not contained in actors".into());
        }
        if self.actors.contains(&self.ego) {
            return Err("ego listed among actors".into());
        }
        if self.category.category().is_some() && self.main_actors.is_empty() {
            return Err("scenario without main actor".into());
        }
        Ok(())
    }

    /// Canonical ordering key: category, start frame, main actors.
    pub fn sort_key(&self) -> (EgoKey, ScenarioClass, u32, Vec<TrackId>, u32) {
        (
            self.ego_key(),
            self.category,
            self.start_frame,
            self.main_actors.iter().copied().collect(),
            self.end_frame,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout_048() -> LaneLayout {
        let lanes = DirectionLanes {
            boundaries: vec![0.0, 4.0, 8.0],
            lane_ids: vec![1, 2],
        };
        LaneLayout {
            upper: lanes.clone(),
            lower: lanes,
        }
    }

    fn state(y: f64) -> TrackState {
        TrackState {
            frame: 1,
            x: 0.0,
            y,
            vx: 30.0,
            vy: 0.0,
            ax: 0.0,
            ay: 0.0,
            lane_id: 1,
        }
    }

    #[test]
    fn lane_of_interior_boundary_and_outside() {
        let layout = layout_048();
        assert_eq!(lane_of(2.0, Direction::Lower, &layout), Some(0));
        // on the shared marking: lane nearer the median (+y side)
        assert_eq!(lane_of(4.0, Direction::Lower, &layout), Some(1));
        assert_eq!(lane_of(9.0, Direction::Lower, &layout), None);
        assert_eq!(lane_of(-0.1, Direction::Lower, &layout), None);
        assert_eq!(lane_of(0.0, Direction::Lower, &layout), Some(0));
        assert_eq!(lane_of(8.0, Direction::Lower, &layout), Some(1));
        assert_eq!(lane_of(f64::NAN, Direction::Lower, &layout), None);
    }

    #[test]
    fn lateral_offset_sign_and_antisymmetry() {
        let ego = state(1.0);
        assert_eq!(lateral_offset_between(&ego, &state(1.0)), 0.0);
        assert_eq!(lateral_offset_between(&ego, &state(4.5)), 3.5);
        assert_eq!(lateral_offset_between(&state(4.5), &ego), -3.5);
    }

    #[test]
    fn highd_marking_conversion() {
        let layout = LaneLayout::from_highd_markings(&[8.5, 12.6, 16.4], &[21.0, 25.0, 28.8]);
        assert_eq!(layout.upper.lane_ids, vec![2, 3]);
        assert_eq!(layout.lower.lane_ids, vec![6, 5]);
        assert_eq!(layout.lower.boundaries, vec![-28.8, -25.0, -21.0]);
        assert!(layout.is_valid());
        let (u, l) = layout.to_highd_markings();
        assert_eq!(u, vec![8.5, 12.6, 16.4]);
        assert_eq!(l, vec![21.0, 25.0, 28.8]);
        // outer truck lane of the upper carriageway is the rightmost one
        assert_eq!(lane_of(10.0, Direction::Upper, &layout), Some(0));
        assert_eq!(lane_of(-27.0, Direction::Lower, &layout), Some(0));
    }

    #[test]
    fn enumerations_have_expected_sizes() {
        assert_eq!(Tag::ALL.len(), 18);
        assert_eq!(ScenarioCategory::ALL.len(), 10);
        for (i, t) in Tag::ALL.iter().enumerate() {
            assert_eq!(t.symbol(), format!("t{}", i + 1));
            assert_eq!(t.symbol().parse::<Tag>().unwrap(), *t);
            assert_eq!(t.mirrored().mirrored(), *t);
        }
        for (i, c) in ScenarioCategory::ALL.iter().enumerate() {
            assert_eq!(c.symbol(), format!("C{}", i + 1));
        }
        assert_eq!(ScenarioCategory::C5.name(), "Cut-in in front of ego vehicle");
        assert_eq!(Tag::Slower.definition(), "Slower (dv < -5 m/s)");
    }

    #[test]
    fn mirrored_layout_reverses_lanes() {
        let layout = LaneLayout::from_highd_markings(&[8.0, 12.0, 16.0, 20.0], &[24.0, 28.0]);
        let m = layout.mirrored();
        assert_eq!(m.upper.boundaries, vec![-20.0, -16.0, -12.0, -8.0]);
        assert_eq!(m.upper.lane_ids, layout.upper.lane_ids);
        assert_eq!(m.mirrored(), layout);
    }

    #[test]
    fn scenario_invariants() {
        let mut s = Scenario {
            category: ScenarioCategory::C1.into(),
            recording: RecordingId(1),
            ego: TrackId(1),
            start_frame: 5,
            end_frame: 10,
            main_actors: [TrackId(2)].into(),
            actors: [TrackId(2), TrackId(3)].into(),
            tags: BTreeSet::new(),
        };
        assert!(s.check_invariants().is_ok());
        s.actors.insert(TrackId(1));
        assert!(s.check_invariants().is_err());
        s.actors.remove(&TrackId(1));
        s.start_frame = 11;
        assert!(s.check_invariants().is_err());
    }

    #[test]
    fn class_symbols_round_trip() {
        assert_eq!("NL".parse::<ScenarioClass>().unwrap(), ScenarioClass::NoLeadingVehicle);
        assert_eq!(
            "C10".parse::<ScenarioClass>().unwrap(),
            ScenarioClass::Category(ScenarioCategory::C10)
        );
        assert!("C11".parse::<ScenarioClass>().is_err());
    }
}
