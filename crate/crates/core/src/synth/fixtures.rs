//! Scripted fixtures with planted scenarios: at least three per category,
//! varying carriageway, side and speeds, plus fixtures without any actor.

use crate::model::{Direction, ScenarioCategory, Side};

use super::{Maneuver, ManeuverScript, PlantedScenario, VehiclePlan};

const DURATION: f64 = 20.0;
const RADIUS: f64 = 100.0;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub script: ManeuverScript,
}

fn script(name: &str, id: u32) -> ManeuverScript {
    ManeuverScript::new(name, id, 3, DURATION)
}

fn lane_shift(lane: usize, side: Side) -> usize {
    match side {
        Side::Left => lane + 1,
        Side::Right => lane - 1,
    }
}

/// Window in which `actor` stays within the perception radius of `ego`,
/// both at constant speed on fixed lanes. Returns the interval that
/// contains the moment their longitudinal positions coincide.
fn passing_window(ego: &VehiclePlan, actor: &VehiclePlan, lane_width: f64, duration: f64) -> (f64, f64) {
    let dy = (actor.lane as f64 - ego.lane as f64) * lane_width;
    let reach = (RADIUS * RADIUS - dy * dy).sqrt();
    let dx0 = actor.x0 - ego.x0;
    let dv = actor.v0 - ego.v0;
    // |dx0 + dv t| <= reach
    let (a, b) = ((-reach - dx0) / dv, (reach - dx0) / dv);
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    (lo.max(0.0), hi.min(duration))
}

struct Lead {
    make: VehiclePlanFn,
    gap: f64,
    dv: f64,
}

fn leading(cat: ScenarioCategory, id: u32, dir: Direction, lane: usize, v: f64, lead: Lead, ramp: Option<(f64, f64, f64)>) -> Fixture {
    let mut s = script(&format!("{}-{id}", cat.symbol().to_lowercase()), id);
    let mut actor = (lead.make)(2, dir, lane, lead.gap, v + lead.dv);
    let (start, end) = match ramp {
        Some((start, duration, dv)) => {
            actor = actor.with(Maneuver::SpeedRamp { start, duration, dv });
            (start, start + duration)
        }
        None => (0.0, DURATION),
    };
    s.vehicles = vec![VehiclePlan::car(1, dir, lane, 0.0, v), actor];
    s.planted = vec![PlantedScenario::new(cat, 1, &[2], start, end)];
    Fixture { script: s }
}

type VehiclePlanFn = fn(u32, Direction, usize, f64, f64) -> VehiclePlan;

fn cut_in(id: u32, dir: Direction, ego_lane: usize, from: Side, v: f64) -> Fixture {
    let mut s = script(&format!("c5-{id}"), id);
    let actor_lane = lane_shift(ego_lane, from);
    let t0 = 6.0;
    s.vehicles = vec![
        VehiclePlan::car(1, dir, ego_lane, 0.0, v),
        VehiclePlan::car(2, dir, actor_lane, 20.0, v + 1.0).with(Maneuver::lane_change(t0, from.mirrored())),
    ];
    s.planted = vec![PlantedScenario::new(ScenarioCategory::C5, 1, &[2], t0, t0 + 4.0)];
    Fixture { script: s }
}

fn cut_out(id: u32, dir: Direction, ego_lane: usize, to: Side, v: f64) -> Fixture {
    let mut s = script(&format!("c6-{id}"), id);
    let t0 = 5.0;
    s.vehicles = vec![
        VehiclePlan::car(1, dir, ego_lane, 0.0, v),
        VehiclePlan::car(2, dir, ego_lane, 30.0, v + 1.0).with(Maneuver::lane_change(t0, to)),
    ];
    s.planted = vec![PlantedScenario::new(ScenarioCategory::C6, 1, &[2], t0, t0 + 4.0)];
    Fixture { script: s }
}

fn change_with_follower(id: u32, dir: Direction, ego_lane: usize, side: Side, v: f64) -> Fixture {
    let mut s = script(&format!("c7-{id}"), id);
    let t0 = 6.0;
    s.vehicles = vec![
        VehiclePlan::car(1, dir, ego_lane, 0.0, v).with(Maneuver::lane_change(t0, side)),
        VehiclePlan::car(2, dir, lane_shift(ego_lane, side), -25.0, v),
    ];
    s.planted = vec![PlantedScenario::new(ScenarioCategory::C7, 1, &[2], t0, t0 + 4.0)];
    Fixture { script: s }
}

fn merge_into_gap(id: u32, dir: Direction, ego_lane: usize, side: Side, v: f64) -> Fixture {
    let mut s = script(&format!("c8-{id}"), id);
    let t0 = 6.0;
    let target = lane_shift(ego_lane, side);
    s.vehicles = vec![
        VehiclePlan::car(1, dir, ego_lane, 0.0, v).with(Maneuver::lane_change(t0, side)),
        VehiclePlan::truck(2, dir, target, 35.0, v),
        VehiclePlan::car(3, dir, target, -25.0, v),
    ];
    s.planted = vec![PlantedScenario::new(ScenarioCategory::C8, 1, &[2, 3], t0, t0 + 4.0)];
    Fixture { script: s }
}

#[allow(clippy::too_many_arguments)]
fn passing(cat: ScenarioCategory, id: u32, dir: Direction, ego_lane: usize, side: Side, v_ego: f64, v_actor: f64, dx0: f64) -> Fixture {
    let mut s = script(&format!("{}-{id}", cat.symbol().to_lowercase()), id);
    let ego = VehiclePlan::car(1, dir, ego_lane, 0.0, v_ego);
    let actor = VehiclePlan::car(2, dir, lane_shift(ego_lane, side), dx0, v_actor);
    let (start, end) = passing_window(&ego, &actor, s.lane_width, DURATION);
    s.vehicles = vec![ego, actor];
    s.planted = vec![PlantedScenario::new(cat, 1, &[2], start, end)];
    Fixture { script: s }
}

fn actor_free(id: u32) -> Vec<Fixture> {
    let mut lone = script("free-lone", id);
    lone.vehicles = vec![VehiclePlan::car(1, Direction::Lower, 1, 0.0, 30.0)
        .with(Maneuver::lane_change(4.0, Side::Left))
        .with(Maneuver::SpeedRamp {
            start: 10.0,
            duration: 3.0,
            dv: -3.0,
        })];
    lone.actor_free = true;

    let mut spaced = script("free-spaced", id + 1);
    spaced.vehicles = vec![
        VehiclePlan::car(1, Direction::Upper, 0, 0.0, 30.0).with(Maneuver::lane_change(3.0, Side::Left)),
        VehiclePlan::truck(2, Direction::Upper, 1, 250.0, 30.0).with(Maneuver::lane_change(8.0, Side::Right)),
        VehiclePlan::car(3, Direction::Upper, 2, 500.0, 31.0).with(Maneuver::SpeedRamp {
            start: 5.0,
            duration: 2.0,
            dv: 2.0,
        }),
    ];
    spaced.actor_free = true;

    // same position, opposite carriageways: never visible to each other
    let mut opposite = script("free-opposite", id + 2);
    opposite.vehicles = vec![
        VehiclePlan::car(1, Direction::Upper, 2, 0.0, 30.0),
        VehiclePlan::car(2, Direction::Lower, 2, 0.0, 30.0).with(Maneuver::lane_change(6.0, Side::Right)),
    ];
    opposite.actor_free = true;

    vec![lone, spaced, opposite].into_iter().map(|script| Fixture { script }).collect()
}

/// The full catalog; recording ids are unique.
pub fn catalog() -> Vec<Fixture> {
    use Direction::{Lower, Upper};
    use ScenarioCategory::*;
    use Side::{Left, Right};
    let car: VehiclePlanFn = VehiclePlan::car;
    let truck: VehiclePlanFn = VehiclePlan::truck;
    vec![
        leading(C1, 1, Lower, 0, 30.0, Lead { make: car, gap: 30.0, dv: 0.0 }, None),
        leading(C1, 2, Upper, 1, 25.0, Lead { make: truck, gap: 45.0, dv: 0.0 }, None),
        leading(C1, 3, Lower, 2, 35.0, Lead { make: car, gap: 60.0, dv: 0.0 }, None),
        leading(C2, 4, Lower, 0, 28.0, Lead { make: car, gap: 30.0, dv: 0.0 }, Some((6.0, 3.0, 3.0))),
        leading(C2, 5, Upper, 1, 24.0, Lead { make: truck, gap: 25.0, dv: 0.0 }, Some((5.0, 4.0, 2.0))),
        leading(C2, 6, Lower, 2, 33.0, Lead { make: car, gap: 40.0, dv: 0.0 }, Some((8.0, 2.0, 2.5))),
        leading(C3, 7, Lower, 0, 30.0, Lead { make: car, gap: 60.0, dv: 0.0 }, Some((6.0, 3.0, -3.0))),
        leading(C3, 8, Upper, 2, 26.0, Lead { make: truck, gap: 70.0, dv: 0.0 }, Some((5.0, 4.0, -2.0))),
        leading(C3, 9, Lower, 1, 34.0, Lead { make: car, gap: 55.0, dv: 0.0 }, Some((9.0, 2.0, -2.5))),
        leading(C4, 10, Lower, 0, 30.0, Lead { make: car, gap: 90.0, dv: -3.0 }, None),
        leading(C4, 11, Upper, 1, 25.0, Lead { make: truck, gap: 80.0, dv: -3.0 }, None),
        leading(C4, 12, Lower, 2, 35.0, Lead { make: car, gap: 95.0, dv: -3.0 }, None),
        cut_in(13, Lower, 0, Left, 30.0),
        cut_in(14, Lower, 1, Right, 27.0),
        cut_in(15, Upper, 1, Left, 33.0),
        cut_out(16, Lower, 0, Left, 30.0),
        cut_out(17, Upper, 1, Right, 26.0),
        cut_out(18, Lower, 1, Left, 34.0),
        change_with_follower(19, Lower, 0, Left, 30.0),
        change_with_follower(20, Upper, 2, Right, 27.0),
        change_with_follower(21, Lower, 1, Right, 33.0),
        merge_into_gap(22, Lower, 0, Left, 30.0),
        merge_into_gap(23, Upper, 1, Right, 26.0),
        merge_into_gap(24, Lower, 1, Left, 34.0),
        passing(C9, 25, Lower, 0, Left, 33.0, 27.0, 40.0),
        passing(C9, 26, Upper, 1, Right, 30.0, 22.0, 60.0),
        passing(C9, 27, Lower, 2, Right, 36.0, 31.0, 20.0),
        passing(C10, 28, Lower, 1, Left, 27.0, 33.0, -40.0),
        passing(C10, 29, Upper, 0, Left, 24.0, 32.0, -70.0),
        passing(C10, 30, Lower, 2, Right, 30.0, 34.0, -15.0),
    ]
    .into_iter()
    .chain(actor_free(31))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::generate;

    #[test]
    fn catalog_generates_and_covers_every_category() {
        let cat = catalog();
        for c in ScenarioCategory::ALL {
            let n = cat.iter().filter(|f| f.script.planted.iter().any(|p| p.category == c)).count();
            assert!(n >= 3, "{c}: {n} fixtures");
        }
        let mut ids = std::collections::BTreeSet::new();
        for f in &cat {
            generate(&f.script).unwrap_or_else(|e| panic!("{e}"));
            assert!(ids.insert(f.script.recording_id));
        }
        assert!(cat.iter().filter(|f| f.script.actor_free).count() >= 3);
    }

    #[test]
    fn passing_window_brackets_the_crossing() {
        let ego = VehiclePlan::car(1, Direction::Lower, 0, 0.0, 33.0);
        let actor = VehiclePlan::car(2, Direction::Lower, 1, 40.0, 27.0);
        let (a, b) = passing_window(&ego, &actor, 3.75, 100.0);
        assert_eq!(a, 0.0);
        let reach = (100.0f64.powi(2) - 3.75f64.powi(2)).sqrt();
        assert!((b - (40.0 + reach) / 6.0).abs() < 1e-12);
    }
}
