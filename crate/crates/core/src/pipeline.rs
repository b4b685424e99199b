//! Recording-level orchestration: activities, ego views, mining and tagging.

use serde::{Deserialize, Serialize};

use crate::activity::ActivityConfig;
use crate::coverage::{ActorAccumulator, ActorBoxSpec, ActorMembership, ActorSelection, EgoFrames, SelectedActor};
use crate::ego_view::{generate_ego_views_with, EgoDataset, EgoViewParams, EgoViewSummary};
use crate::exec::Exec;
use crate::mining::{mine_scenarios, ActivityIndex, MiningConfig};
use crate::model::{Recording, Scenario};
use crate::tagging::{assign_tags, TaggingConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    pub ego_view: EgoViewParams,
    pub activity: ActivityConfig,
    pub mining: MiningConfig,
    pub tagging: TaggingConfig,
}

impl PipelineParams {
    pub fn validate(&self) -> Result<(), String> {
        self.ego_view.validate()?;
        self.activity.validate()?;
        self.mining.validate()?;
        self.tagging.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinedRecording {
    /// Tagged scenarios in canonical order.
    pub scenarios: Vec<Scenario>,
    /// Ego datasets in ego id order.
    pub egos: Vec<EgoFrames>,
    pub summary: EgoViewSummary,
}

pub struct PreparedRecording {
    pub activities: ActivityIndex,
    pub views: Vec<EgoDataset>,
    pub summary: EgoViewSummary,
}

pub fn prepare(r: &Recording, params: &PipelineParams, exec: Exec) -> PreparedRecording {
    let activities = ActivityIndex::compute(r, &params.activity, exec);
    let views = generate_ego_views_with(r, &params.ego_view, exec);
    PreparedRecording {
        activities,
        views: views.datasets,
        summary: views.summary,
    }
}

fn mine_one(ego: &EgoDataset, acts: &ActivityIndex, params: &PipelineParams) -> Vec<Scenario> {
    let mut found = mine_scenarios(ego, acts, &params.mining);
    for s in &mut found {
        s.tags = assign_tags(s, ego, acts, &params.tagging);
    }
    found
}

pub fn mine_prepared(p: &PreparedRecording, params: &PipelineParams, exec: Exec) -> MinedRecording {
    let per_ego = exec.map(&p.views, |ego| mine_one(ego, &p.activities, params));
    let mut scenarios: Vec<Scenario> = per_ego.into_iter().flatten().collect();
    scenarios.sort_by_key(Scenario::sort_key);
    MinedRecording {
        scenarios,
        egos: p.views.iter().map(EgoFrames::of).collect(),
        summary: p.summary.clone(),
    }
}

pub fn mine_recording(r: &Recording, params: &PipelineParams, exec: Exec) -> MinedRecording {
    mine_prepared(&prepare(r, params, exec), params, exec)
}

/// Actor metric state per box for one recording, using previously mined
/// scenarios of that recording.
pub fn actor_accumulators(
    views: &[EgoDataset],
    scenarios: &[Scenario],
    boxes: &[ActorBoxSpec],
    membership: ActorMembership,
    exec: Exec,
) -> Vec<ActorAccumulator> {
    exec.map(boxes, |spec| {
        let mut sel = ActorSelection::default();
        let mut acc = ActorAccumulator::default();
        for ego in views {
            let start = scenarios.partition_point(|s| s.ego_key() < ego.key());
            let end = scenarios.partition_point(|s| s.ego_key() <= ego.key());
            let mine: Vec<&Scenario> = scenarios[start..end].iter().collect();
            sel.actors.clear();
            sel.actors.extend(selected_in(ego, spec));
            for a in &sel.actors {
                acc.add(a, &mine, membership);
            }
        }
        acc
    })
}

fn selected_in(ego: &EgoDataset, spec: &ActorBoxSpec) -> Vec<SelectedActor> {
    crate::coverage::select_actors(std::slice::from_ref(ego), spec)
        .map(|s| s.actors)
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::fixtures;

    #[test]
    fn sequential_and_parallel_agree() {
        let fx = fixtures::catalog().into_iter().next().unwrap();
        let (r, _) = crate::synth::generate(&fx.script).unwrap();
        let p = PipelineParams::default();
        assert_eq!(
            mine_recording(&r, &p, Exec::Sequential),
            mine_recording(&r, &p, Exec::Parallel)
        );
    }
}
