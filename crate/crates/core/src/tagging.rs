//! Scenario tags and the tag-by-category count matrix.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{LateralKind, LongitudinalKind, RelativeZone};
use crate::ego_view::EgoDataset;
use crate::mining::ActivityIndex;
use crate::model::{Scenario, ScenarioCategory, Tag, VehicleClass};

/// Named tag subsets accepted by the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TagGroup {
    VehicleType,
    Position,
    Speed,
    Longitudinal,
    Lateral,
}

impl TagGroup {
    pub const ALL: [TagGroup; 5] = [
        TagGroup::VehicleType,
        TagGroup::Position,
        TagGroup::Speed,
        TagGroup::Longitudinal,
        TagGroup::Lateral,
    ];

    pub fn tags(self) -> &'static [Tag] {
        let all = &Tag::ALL;
        match self {
            TagGroup::VehicleType => &all[0..2],
            TagGroup::Position => &all[2..10],
            TagGroup::Speed => &all[10..12],
            TagGroup::Longitudinal => &all[12..15],
            TagGroup::Lateral => &all[15..18],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TagGroup::VehicleType => "vehicle-type",
            TagGroup::Position => "position",
            TagGroup::Speed => "speed",
            TagGroup::Longitudinal => "longitudinal",
            TagGroup::Lateral => "lateral",
        }
    }
}

impl FromStr for TagGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TagGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown tag group `{s}`"))
    }
}

/// Parses a list of tag symbols (`t3`) and group names (`position`).
pub fn parse_tag_selection<S: AsRef<str>>(items: &[S]) -> Result<Vec<Tag>, String> {
    let mut out = BTreeSet::new();
    for item in items {
        let item = item.as_ref().trim();
        if let Ok(tag) = item.parse::<Tag>() {
            out.insert(tag);
        } else if item == "all" {
            out.extend(Tag::ALL);
        } else {
            out.extend(item.parse::<TagGroup>()?.tags().iter().copied());
        }
    }
    Ok(out.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaggingConfig {
    /// Speed difference (m/s) for the slower/faster tags; strict comparison.
    pub dv_threshold: f64,
    pub tags: Vec<Tag>,
}

impl Default for TaggingConfig {
    fn default() -> Self {
        TaggingConfig {
            dv_threshold: 5.0,
            tags: Tag::ALL.to_vec(),
        }
    }
}

impl TaggingConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dv_threshold > 0.0) {
            return Err(format!("tagging.dv_threshold must be > 0, got {}", self.dv_threshold));
        }
        Ok(())
    }
}

fn zone_tag(zone: RelativeZone) -> Option<Tag> {
    Some(match zone {
        RelativeZone::SameLaneFront => Tag::SameLaneFront,
        RelativeZone::SameLaneRear => Tag::SameLaneRear,
        RelativeZone::FrontLeft => Tag::FrontLeft,
        RelativeZone::FrontRight => Tag::FrontRight,
        RelativeZone::SideLeft => Tag::SideLeft,
        RelativeZone::SideRight => Tag::SideRight,
        RelativeZone::RearLeft => Tag::RearLeft,
        RelativeZone::RearRight => Tag::RearRight,
        RelativeZone::None => return None,
    })
}

/// Tags of one scenario. Only the scenario's actors are considered (never
/// the ego); positions and speed differences are taken at the start frame,
/// activities on overlap with the interval.
pub fn assign_tags(s: &Scenario, ego: &EgoDataset, acts: &ActivityIndex, cfg: &TaggingConfig) -> BTreeSet<Tag> {
    let mut tags = BTreeSet::new();
    let (start, end) = (s.start_frame, s.end_frame);

    for a in ego.visible_at(start).iter().filter(|a| s.actors.contains(&a.actor)) {
        if let Some(t) = zone_tag(a.zone) {
            tags.insert(t);
        }
        if a.dvx < -cfg.dv_threshold {
            tags.insert(Tag::Slower);
        }
        if a.dvx > cfg.dv_threshold {
            tags.insert(Tag::Faster);
        }
    }

    for &id in &s.actors {
        // class is constant over a track; any visible frame will do
        let class = (start..=end).find_map(|f| ego.actor_at(f, id)).map(|a| a.class);
        match class {
            Some(VehicleClass::Car) => tags.insert(Tag::Car),
            Some(VehicleClass::Truck) => tags.insert(Tag::Truck),
            None => false,
        };
        let Some(a) = acts.get(id) else { continue };
        for seg in a.longitudinal.iter().filter(|g| g.overlaps(start, end)) {
            tags.insert(match seg.kind {
                LongitudinalKind::Cruising => Tag::Cruising,
                LongitudinalKind::Accelerating => Tag::Accelerating,
                LongitudinalKind::Decelerating => Tag::Decelerating,
            });
        }
        for seg in a.lateral.iter().filter(|g| g.overlaps(start, end)) {
            tags.insert(match seg.kind {
                LateralKind::KeepLane => Tag::KeepingLane,
                LateralKind::ChangeLeft => Tag::ChangingLaneLeft,
                LateralKind::ChangeRight => Tag::ChangingLaneRight,
            });
        }
    }
    tags.retain(|t| cfg.tags.contains(t));
    tags
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("tag count file: {0}")]
    Csv(#[from] csv::Error),
    #[error("tag count file: {0}")]
    Format(String),
}

/// Counts of scenarios per (tag, category).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagCountMatrix {
    pub tags: Vec<Tag>,
    pub categories: Vec<ScenarioCategory>,
    /// Row-major: `counts[tag_row * categories.len() + category_col]`.
    pub counts: Vec<u64>,
}

impl TagCountMatrix {
    pub fn zeros(tags: &[Tag], categories: &[ScenarioCategory]) -> Self {
        TagCountMatrix {
            tags: tags.to_vec(),
            categories: categories.to_vec(),
            counts: vec![0; tags.len() * categories.len()],
        }
    }

    fn slot(&self, tag: Tag, category: ScenarioCategory) -> Option<usize> {
        let r = self.tags.iter().position(|&t| t == tag)?;
        let c = self.categories.iter().position(|&c| c == category)?;
        Some(r * self.categories.len() + c)
    }

    pub fn get(&self, tag: Tag, category: ScenarioCategory) -> Option<u64> {
        self.slot(tag, category).map(|i| self.counts[i])
    }

    pub fn set(&mut self, tag: Tag, category: ScenarioCategory, value: u64) {
        if let Some(i) = self.slot(tag, category) {
            self.counts[i] = value;
        }
    }

    /// Elementwise sum; both matrices must have identical axes.
    pub fn merge(&mut self, other: &TagCountMatrix) {
        assert_eq!(self.tags, other.tags, "tag axes differ");
        assert_eq!(self.categories, other.categories, "category axes differ");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Swaps the rows of left/right tag pairs.
    pub fn mirrored(&self) -> TagCountMatrix {
        let mut out = self.clone();
        for &t in &self.tags {
            for &c in &self.categories {
                let v = self.get(t.mirrored(), c).unwrap_or(0);
                out.set(t, c, v);
            }
        }
        out
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, MatrixError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(MatrixError::Format("need a tag column and at least one category".into()));
        }
        let categories = headers
            .iter()
            .skip(1)
            .map(|h| h.parse::<ScenarioCategory>().map_err(|e| MatrixError::Format(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut tags = Vec::new();
        let mut counts = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let tag: Tag = rec[0]
                .parse()
                .map_err(|e: crate::model::UnknownSymbol| MatrixError::Format(e.to_string()))?;
            if tags.contains(&tag) {
                return Err(MatrixError::Format(format!("duplicate row for {tag}")));
            }
            tags.push(tag);
            for cell in rec.iter().skip(1) {
                let v = cell.parse::<u64>().map_err(|_| {
                    MatrixError::Format(format!("row {}: `{cell}` is not a non-negative integer", line + 2))
                })?;
                counts.push(v);
            }
        }
        Ok(TagCountMatrix {
            tags,
            categories,
            counts,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), MatrixError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["tag".to_string()];
        header.extend(self.categories.iter().map(|c| c.symbol().to_string()));
        w.write_record(&header)?;
        for (r, t) in self.tags.iter().enumerate() {
            let mut row = vec![t.symbol().to_string()];
            let n = self.categories.len();
            row.extend(self.counts[r * n..(r + 1) * n].iter().map(u64::to_string));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// kappa(t, c) over tagged scenarios. Scenarios outside `categories` (and
/// catch-all scenarios) are ignored.
pub fn build_tag_count_matrix<'a>(
    scenarios: impl IntoIterator<Item = &'a Scenario>,
    tags: &[Tag],
    categories: &[ScenarioCategory],
) -> TagCountMatrix {
    let mut m = TagCountMatrix::zeros(tags, categories);
    for s in scenarios {
        let Some(c) = s.category.category() else { continue };
        for &t in &s.tags {
            if let Some(i) = m.slot(t, c) {
                m.counts[i] += 1;
            }
        }
    }
    m
}

/// Per-category scenario counts, catch-all last.
pub fn category_counts<'a>(scenarios: impl IntoIterator<Item = &'a Scenario>) -> ([u64; 10], u64) {
    let mut counts = [0u64; 10];
    let mut catch_all = 0;
    for s in scenarios {
        match s.category.category() {
            Some(c) => counts[c.index()] += 1,
            None => catch_all += 1,
        }
    }
    (counts, catch_all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RecordingId, ScenarioClass, TrackId};

    fn scenario(c: ScenarioCategory, tags: &[Tag]) -> Scenario {
        Scenario {
            category: c.into(),
            recording: RecordingId(1),
            ego: TrackId(1),
            start_frame: 1,
            end_frame: 10,
            main_actors: [TrackId(2)].into(),
            actors: [TrackId(2)].into(),
            tags: tags.iter().copied().collect(),
        }
    }

    #[test]
    fn ten_cut_ins_tagged_left() {
        let s: Vec<_> = (0..10).map(|_| scenario(ScenarioCategory::C5, &[Tag::FrontLeft])).collect();
        let m = build_tag_count_matrix(&s, &Tag::ALL, &ScenarioCategory::ALL);
        assert_eq!(m.get(Tag::FrontLeft, ScenarioCategory::C5), Some(10));
        assert_eq!(m.counts.iter().sum::<u64>(), 10);
    }

    #[test]
    fn empty_list_gives_zero_matrix() {
        let m = build_tag_count_matrix(&[], &Tag::ALL, &ScenarioCategory::ALL);
        assert!(m.counts.iter().all(|&c| c == 0));
        assert_eq!(m.counts.len(), 180);
    }

    #[test]
    fn catch_all_is_not_counted() {
        let mut s = scenario(ScenarioCategory::C1, &[Tag::Car]);
        s.category = ScenarioClass::NoLeadingVehicle;
        let m = build_tag_count_matrix([&s], &Tag::ALL, &ScenarioCategory::ALL);
        assert!(m.counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn csv_round_trip_and_fixture() {
        let text = include_str!("../fixtures/highd_tag_counts.csv");
        let m = TagCountMatrix::read_csv(text.as_bytes()).unwrap();
        assert_eq!(m.tags.len(), 18);
        assert_eq!(m.categories.len(), 10);
        assert_eq!(m.get(Tag::Car, ScenarioCategory::C1), Some(102111));
        assert_eq!(m.get(Tag::ChangingLaneRight, ScenarioCategory::C7), Some(12));
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }

    #[test]
    fn bad_cells_are_rejected() {
        assert!(TagCountMatrix::read_csv("tag,C1\nt1,-3\n".as_bytes()).is_err());
        assert!(TagCountMatrix::read_csv("tag,C11\nt1,3\n".as_bytes()).is_err());
        assert!(TagCountMatrix::read_csv("tag,C1\nt1,3\nt1,4\n".as_bytes()).is_err());
    }

    #[test]
    fn mirror_swaps_pairs() {
        let mut m = TagCountMatrix::zeros(&Tag::ALL, &[ScenarioCategory::C1]);
        m.set(Tag::FrontLeft, ScenarioCategory::C1, 7);
        m.set(Tag::Car, ScenarioCategory::C1, 3);
        let r = m.mirrored();
        assert_eq!(r.get(Tag::FrontRight, ScenarioCategory::C1), Some(7));
        assert_eq!(r.get(Tag::FrontLeft, ScenarioCategory::C1), Some(0));
        assert_eq!(r.get(Tag::Car, ScenarioCategory::C1), Some(3));
        assert_eq!(r.mirrored(), m);
    }

    #[test]
    fn tag_selection_parsing() {
        let t = parse_tag_selection(&["vehicle-type", "t10", "speed"]).unwrap();
        assert_eq!(t, vec![Tag::Car, Tag::Truck, Tag::RearRight, Tag::Slower, Tag::Faster]);
        assert!(parse_tag_selection(&["bogus"]).is_err());
        assert_eq!(parse_tag_selection(&["all"]).unwrap().len(), 18);
    }
}
