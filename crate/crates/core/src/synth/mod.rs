//! Synthetic HighD-format recordings from scripted maneuvers, with planted
//! ground-truth scenarios. Used by tests, benches and the `synth` command.
//!
//! Motion is analytic: speed ramps are linear in time, lane changes follow a
//! raised-cosine lateral profile. Velocities are forward differences of the
//! sampled positions and accelerations forward differences of velocities.

pub mod fixtures;
pub mod oracle;
pub mod random;

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::EgoFrames;
use crate::highd::{write_recording, IngestError, RecordingPaths};
use crate::model::{
    lane_of, Direction, LaneLayout, Recording, RecordingId, Scenario, ScenarioCategory, Side, Track,
    TrackId, TrackState, VehicleClass,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("script `{script}`: {message}")]
    InvalidScript { script: String, message: String },
    #[error("script `{script}`: vehicles {a} and {b} collide at t = {time:.2} s")]
    Collision {
        script: String,
        a: TrackId,
        b: TrackId,
        time: f64,
    },
    #[error("script `{script}`: vehicle {vehicle} leaves the road at t = {time:.2} s")]
    OffRoad {
        script: String,
        vehicle: TrackId,
        time: f64,
    },
    #[error(transparent)]
    Write(#[from] IngestError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Maneuver {
    LaneChange { start: f64, duration: f64, side: Side },
    SpeedRamp { start: f64, duration: f64, dv: f64 },
}

impl Maneuver {
    pub const DEFAULT_LANE_CHANGE_DURATION: f64 = 4.0;

    pub fn lane_change(start: f64, side: Side) -> Maneuver {
        Maneuver::LaneChange {
            start,
            duration: Self::DEFAULT_LANE_CHANGE_DURATION,
            side,
        }
    }

    pub fn window(&self) -> (f64, f64) {
        match *self {
            Maneuver::LaneChange { start, duration, .. } | Maneuver::SpeedRamp { start, duration, .. } => {
                (start, start + duration)
            }
        }
    }

    fn mirrored(&self) -> Maneuver {
        match *self {
            Maneuver::LaneChange { start, duration, side } => Maneuver::LaneChange {
                start,
                duration,
                side: side.mirrored(),
            },
            ref ramp => ramp.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehiclePlan {
    pub id: u32,
    pub class: VehicleClass,
    pub direction: Direction,
    /// Extent along the road (m).
    pub length: f64,
    /// Extent across the road (m).
    pub width: f64,
    /// Initial lane index, 0 = rightmost.
    pub lane: usize,
    /// Initial longitudinal position in the normalized frame (m).
    pub x0: f64,
    pub v0: f64,
    pub maneuvers: Vec<Maneuver>,
}

impl VehiclePlan {
    pub fn car(id: u32, direction: Direction, lane: usize, x0: f64, v0: f64) -> VehiclePlan {
        VehiclePlan {
            id,
            class: VehicleClass::Car,
            direction,
            length: 4.5,
            width: 1.9,
            lane,
            x0,
            v0,
            maneuvers: Vec::new(),
        }
    }

    pub fn truck(id: u32, direction: Direction, lane: usize, x0: f64, v0: f64) -> VehiclePlan {
        VehiclePlan {
            class: VehicleClass::Truck,
            length: 16.0,
            width: 2.5,
            ..VehiclePlan::car(id, direction, lane, x0, v0)
        }
    }

    pub fn with(mut self, m: Maneuver) -> VehiclePlan {
        self.maneuvers.push(m);
        self
    }

    pub fn track_id(&self) -> TrackId {
        TrackId(self.id)
    }

    /// Longitudinal position at time `t`.
    pub fn x_at(&self, t: f64) -> f64 {
        let mut x = self.x0 + self.v0 * t;
        for m in &self.maneuvers {
            if let Maneuver::SpeedRamp { start, duration, dv } = *m {
                let tau = t - start;
                x += dv * if tau <= 0.0 {
                    0.0
                } else if tau < duration {
                    tau * tau / (2.0 * duration)
                } else {
                    tau - duration / 2.0
                };
            }
        }
        x
    }

    /// Speed at time `t` (analytic, not the sampled forward difference).
    pub fn v_at(&self, t: f64) -> f64 {
        let mut v = self.v0;
        for m in &self.maneuvers {
            if let Maneuver::SpeedRamp { start, duration, dv } = *m {
                v += dv * ((t - start) / duration).clamp(0.0, 1.0);
            }
        }
        v
    }

    /// Lateral offset from the initial lane centre at time `t`.
    fn lateral_shift(&self, t: f64, lane_width: f64) -> f64 {
        let mut y = 0.0;
        for m in &self.maneuvers {
            if let Maneuver::LaneChange { start, duration, side } = *m {
                let u = ((t - start) / duration).clamp(0.0, 1.0);
                let dy = match side {
                    Side::Left => lane_width,
                    Side::Right => -lane_width,
                };
                y += dy * (1.0 - (PI * u).cos()) / 2.0;
            }
        }
        y
    }

    /// Sign of the lateral motion of the active lane change at `t`.
    fn lateral_heading(&self, t: f64) -> f64 {
        for m in &self.maneuvers {
            if let Maneuver::LaneChange { start, duration, side } = *m {
                if t >= start && t <= start + duration {
                    return if side == Side::Left { 1.0 } else { -1.0 };
                }
            }
        }
        1.0
    }

    fn mirrored(&self, lanes: usize) -> VehiclePlan {
        VehiclePlan {
            lane: lanes - 1 - self.lane,
            maneuvers: self.maneuvers.iter().map(Maneuver::mirrored).collect(),
            ..self.clone()
        }
    }
}

/// A scenario planted by construction, with its interval in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedScenario {
    pub category: ScenarioCategory,
    pub ego: TrackId,
    pub main_actors: BTreeSet<TrackId>,
    pub start: f64,
    pub end: f64,
}

impl PlantedScenario {
    pub fn new(category: ScenarioCategory, ego: u32, main: &[u32], start: f64, end: f64) -> Self {
        PlantedScenario {
            category,
            ego: TrackId(ego),
            main_actors: main.iter().map(|&a| TrackId(a)).collect(),
            start,
            end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub recording: RecordingId,
    pub frame_rate: f64,
    pub planted: Vec<PlantedScenario>,
    /// No vehicle ever sees another one.
    pub actor_free: bool,
}

impl GroundTruth {
    pub fn frame_of(&self, t: f64) -> u32 {
        1 + (t * self.frame_rate).round() as u32
    }

    /// Planted scenarios without a matching detection. A detection matches
    /// when category, ego and main actors agree and both boundaries are
    /// within `tolerance` seconds of the planted interval clipped to the ego
    /// dataset.
    pub fn unmatched<'a>(&'a self, detected: &[Scenario], egos: &[EgoFrames], tolerance: f64) -> Vec<&'a PlantedScenario> {
        let tol = (tolerance * self.frame_rate).round() as i64;
        self.planted
            .iter()
            .filter(|p| {
                let Some(ego) = egos.iter().find(|e| e.key.recording == self.recording && e.key.ego == p.ego) else {
                    return true;
                };
                let start = self.frame_of(p.start).clamp(ego.first_frame, ego.last_frame) as i64;
                let end = self.frame_of(p.end).clamp(ego.first_frame, ego.last_frame) as i64;
                !detected.iter().any(|s| {
                    s.category == p.category.into()
                        && s.recording == self.recording
                        && s.ego == p.ego
                        && s.main_actors == p.main_actors
                        && (s.start_frame as i64 - start).abs() <= tol
                        && (s.end_frame as i64 - end).abs() <= tol
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeuverScript {
    pub name: String,
    pub recording_id: u32,
    /// Lanes per carriageway.
    pub lanes: usize,
    pub lane_width: f64,
    /// Normalized lateral position of the rightmost marking, upper then lower
    /// carriageway.
    pub lateral_origin: [f64; 2],
    pub duration: f64,
    pub frame_rate: f64,
    pub seed: u64,
    /// Amplitude of the seeded perturbation of initial positions (m); speeds
    /// are perturbed by a tenth of it (m/s).
    pub jitter: f64,
    pub vehicles: Vec<VehiclePlan>,
    pub planted: Vec<PlantedScenario>,
    pub actor_free: bool,
}

impl ManeuverScript {
    pub fn new(name: &str, recording_id: u32, lanes: usize, duration: f64) -> ManeuverScript {
        let lane_width = 3.75;
        let upper = 8.5;
        let lower = upper + lanes as f64 * lane_width + 3.0;
        ManeuverScript {
            name: name.to_string(),
            recording_id,
            lanes,
            lane_width,
            lateral_origin: [upper, -(lower + lanes as f64 * lane_width)],
            duration,
            frame_rate: 25.0,
            seed: 0,
            jitter: 0.0,
            vehicles: Vec::new(),
            planted: Vec::new(),
            actor_free: false,
        }
    }

    pub fn frame_count(&self) -> u32 {
        (self.duration * self.frame_rate).round() as u32
    }

    pub fn time_of(&self, frame: u32) -> f64 {
        f64::from(frame - 1) / self.frame_rate
    }

    pub fn layout(&self) -> LaneLayout {
        let bounds = |o: f64| -> Vec<f64> { (0..=self.lanes).map(|k| o + k as f64 * self.lane_width).collect() };
        let upper = bounds(self.lateral_origin[0]);
        let lower: Vec<f64> = bounds(self.lateral_origin[1]).iter().rev().map(|b| -b).collect();
        LaneLayout::from_highd_markings(&upper, &lower)
    }

    /// The same script reflected across the road axis.
    pub fn mirrored(&self) -> ManeuverScript {
        let span = self.lanes as f64 * self.lane_width;
        ManeuverScript {
            name: format!("{}-mirrored", self.name),
            lateral_origin: self.lateral_origin.map(|o| -(o + span)),
            vehicles: self.vehicles.iter().map(|v| v.mirrored(self.lanes)).collect(),
            ..self.clone()
        }
    }

    fn invalid(&self, message: String) -> SynthError {
        SynthError::InvalidScript {
            script: self.name.clone(),
            message,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.lanes == 0 || !(self.lane_width > 0.0) {
            return Err(self.invalid("need at least one lane of positive width".into()));
        }
        if !(self.frame_rate > 0.0) || !(self.duration > 0.0) || self.frame_count() < 2 {
            return Err(self.invalid("duration and frame rate must be positive".into()));
        }
        let mut ids = BTreeSet::new();
        for v in &self.vehicles {
            if !ids.insert(v.id) {
                return Err(self.invalid(format!("duplicate vehicle id {}", v.id)));
            }
            if v.lane >= self.lanes {
                return Err(self.invalid(format!("vehicle {}: lane {} does not exist", v.id, v.lane)));
            }
            if !(v.length > 0.0) || !(v.width > 0.0) {
                return Err(self.invalid(format!("vehicle {}: extents must be positive", v.id)));
            }
            let mut lane = v.lane as i64;
            let mut changes: Vec<&Maneuver> = v
                .maneuvers
                .iter()
                .filter(|m| matches!(m, Maneuver::LaneChange { .. }))
                .collect();
            changes.sort_by(|a, b| a.window().0.total_cmp(&b.window().0));
            let mut busy_until = f64::NEG_INFINITY;
            for m in &v.maneuvers {
                let (s, e) = m.window();
                if !(s >= 0.0) || !(e > s) || e > self.duration {
                    return Err(self.invalid(format!("vehicle {}: maneuver {m:?} outside the recording", v.id)));
                }
            }
            for m in changes {
                let (s, e) = m.window();
                if s < busy_until {
                    return Err(self.invalid(format!("vehicle {}: overlapping lane changes", v.id)));
                }
                busy_until = e;
                if let Maneuver::LaneChange { side, .. } = m {
                    lane += if *side == Side::Left { 1 } else { -1 };
                }
                if lane < 0 || lane >= self.lanes as i64 {
                    return Err(self.invalid(format!("vehicle {}: lane change leaves the road", v.id)));
                }
            }
            // speed is piecewise linear, so checking the breakpoints suffices
            let mut times = vec![0.0, self.duration];
            for m in &v.maneuvers {
                let (s, e) = m.window();
                times.extend([s, e]);
            }
            if times.iter().any(|&t| !(v.v_at(t) > 0.0)) {
                return Err(self.invalid(format!("vehicle {}: speed must stay positive", v.id)));
            }
        }
        Ok(())
    }

    /// Script with the seeded jitter applied to initial positions and speeds.
    pub fn effective(&self) -> ManeuverScript {
        if self.jitter == 0.0 {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = self.clone();
        out.jitter = 0.0;
        for v in &mut out.vehicles {
            v.x0 += rng.random_range(-1.0..=1.0) * self.jitter;
            v.v0 += rng.random_range(-1.0..=1.0) * self.jitter * 0.1;
        }
        out
    }

    /// Sampled (x, y) of `v` at frames `1..=frame_count() + 2`.
    fn sample(&self, v: &VehiclePlan, layout: &LaneLayout) -> Vec<(f64, f64)> {
        let b = &layout.lanes(v.direction).boundaries;
        let centre = (b[v.lane] + b[v.lane + 1]) / 2.0;
        let interior = &b[1..b.len() - 1];
        (1..=self.frame_count() + 2)
            .map(|k| {
                let t = self.time_of(k);
                let mut y = centre + v.lateral_shift(t, self.lane_width);
                if interior.contains(&y) {
                    // keep samples off the markings so lane membership is unambiguous
                    y += v.lateral_heading(t) * 1e-9;
                }
                (v.x_at(t), y)
            })
            .collect()
    }
}

fn build_track(script: &ManeuverScript, v: &VehiclePlan, layout: &LaneLayout, samples: &[(f64, f64)]) -> Result<Track, SynthError> {
    let fr = script.frame_rate;
    let n = script.frame_count() as usize;
    let vel: Vec<(f64, f64)> = samples
        .windows(2)
        .map(|w| ((w[1].0 - w[0].0) * fr, (w[1].1 - w[0].1) * fr))
        .collect();
    let lanes = layout.lanes(v.direction);
    let mut states = Vec::with_capacity(n);
    for k in 0..n {
        let (x, y) = samples[k];
        let Some(lane) = lane_of(y, v.direction, layout) else {
            return Err(SynthError::OffRoad {
                script: script.name.clone(),
                vehicle: v.track_id(),
                time: script.time_of(k as u32 + 1),
            });
        };
        states.push(TrackState {
            frame: k as u32 + 1,
            x,
            y,
            vx: vel[k].0,
            vy: vel[k].1,
            ax: (vel[k + 1].0 - vel[k].0) * fr,
            ay: (vel[k + 1].1 - vel[k].1) * fr,
            lane_id: lanes.lane_ids[lane],
        });
    }
    Ok(Track {
        id: v.track_id(),
        class: v.class,
        direction: v.direction,
        length: v.length,
        width: v.width,
        states,
    })
}

/// First frame at which two same-direction vehicles' boxes overlap.
pub(crate) fn first_collision(a: &VehiclePlan, sa: &[(f64, f64)], b: &VehiclePlan, sb: &[(f64, f64)]) -> Option<usize> {
    if a.direction != b.direction {
        return None;
    }
    let lx = (a.length + b.length) / 2.0;
    let ly = (a.width + b.width) / 2.0;
    sa.iter()
        .zip(sb)
        .position(|(p, q)| (p.0 - q.0).abs() < lx && (p.1 - q.1).abs() < ly)
}

/// Builds the recording in memory.
pub fn generate(script: &ManeuverScript) -> Result<(Recording, GroundTruth), SynthError> {
    script.validate()?;
    let script = script.effective();
    let layout = script.layout();
    let n = script.frame_count() as usize;
    let samples: Vec<Vec<(f64, f64)>> = script
        .vehicles
        .iter()
        .map(|v| {
            let mut s = script.sample(v, &layout);
            s.truncate(n + 2);
            s
        })
        .collect();
    for i in 0..script.vehicles.len() {
        for j in i + 1..script.vehicles.len() {
            let (a, b) = (&script.vehicles[i], &script.vehicles[j]);
            if let Some(k) = first_collision(a, &samples[i][..n], b, &samples[j][..n]) {
                return Err(SynthError::Collision {
                    script: script.name.clone(),
                    a: a.track_id(),
                    b: b.track_id(),
                    time: script.time_of(k as u32 + 1),
                });
            }
        }
    }
    let mut tracks = script
        .vehicles
        .iter()
        .zip(&samples)
        .map(|(v, s)| build_track(&script, v, &layout, s))
        .collect::<Result<Vec<_>, _>>()?;
    tracks.sort_by_key(|t| t.id);
    let recording = Recording {
        id: RecordingId(script.recording_id),
        location_id: 1,
        frame_rate: script.frame_rate,
        first_frame: 1,
        last_frame: n as u32,
        lane_layout: layout,
        tracks,
    };
    let truth = GroundTruth {
        recording: recording.id,
        frame_rate: script.frame_rate,
        planted: script.planted.clone(),
        actor_free: script.actor_free,
    };
    Ok((recording, truth))
}

/// Builds the recording and writes it as a HighD CSV triple into `dir`.
pub fn write_script(script: &ManeuverScript, dir: &Path) -> Result<(RecordingPaths, GroundTruth), SynthError> {
    let (r, truth) = generate(script)?;
    Ok((write_recording(&r, dir)?, truth))
}
