//! Coverage report: computation from a scenario store (or a tag-count file)
//! and rendering into curve CSVs and a text summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use coverage_core::coverage::{
    tag_coverage, time_histogram, ActorAccumulator, TimeHistogram, CoverageError, CurvePoint, EgoFrames,
};
use coverage_core::ego_view::generate_ego_views_with;
use coverage_core::highd::{parse_recording, RecordingPaths};
use coverage_core::model::{Scenario, ScenarioCategory, ScenarioClass, Tag};
use coverage_core::pipeline::actor_accumulators;
use coverage_core::tagging::{build_tag_count_matrix, category_counts, TagCountMatrix};
use coverage_core::Exec;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::store::{read_index, read_recording, RecordingScenarios, StoreIndex};

pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Tag,
    Time,
    Actor,
    ActorOverTime,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Tag => "tag",
            Metric::Time => "time",
            Metric::Actor => "actor",
            Metric::ActorOverTime => "actor-over-time",
        }
    }

    pub fn param(self) -> &'static str {
        match self {
            Metric::Tag | Metric::Time => "n",
            Metric::Actor | Metric::ActorOverTime => "long_front",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCurve {
    pub label: String,
    pub metric: Metric,
    pub points: Vec<CurvePoint>,
    /// Grid values at which the metric is undefined (no frames or no
    /// selected actors).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub recordings: usize,
    pub ego_datasets: usize,
    pub total_frames: u64,
    pub scenarios: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub version: String,
    /// Absent when computed from a tag-count file.
    pub fingerprint: Option<String>,
    pub config: Config,
    pub dataset: Option<DatasetSummary>,
    /// Scenario count per category symbol (including `NL` when enabled).
    pub category_counts: BTreeMap<String, u64>,
    pub kappa: TagCountMatrix,
    pub curves: Vec<ReportCurve>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CoverageReport {
    pub fn read(path: &Path) -> Result<CoverageReport> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let r: CoverageReport =
            serde_json::from_str(&text).with_context(|| format!("{}: malformed coverage report", path.display()))?;
        for c in &r.curves {
            if let Some(p) = c.points.iter().find(|p| !(0.0..=1.0).contains(&p.value)) {
                bail!("{}: curve `{}` has value {} outside [0, 1]", path.display(), c.label, p.value);
            }
        }
        Ok(r)
    }
}

/// Wall-clock seconds per stage, kept out of the report so that reports are
/// reproducible byte for byte.
pub type Timings = BTreeMap<String, f64>;

fn curve(label: String, metric: Metric, grid: &[f64], values: Vec<Result<f64, CoverageError>>) -> Result<ReportCurve> {
    let mut out = ReportCurve {
        label,
        metric,
        points: Vec::new(),
        undefined: Vec::new(),
    };
    for (&param, v) in grid.iter().zip(values) {
        match v {
            Ok(value) => out.points.push(CurvePoint { param, value }),
            Err(CoverageError::NoActors | CoverageError::NoFrames) => out.undefined.push(param),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn tag_curves(cfg: &Config, kappa: &TagCountMatrix) -> Result<Vec<ReportCurve>> {
    let grid: Vec<f64> = cfg.coverage.n_grid.iter().map(|&n| n as f64).collect();
    cfg.tag_curves()?
        .into_iter()
        .map(|(label, tags, cats)| {
            let values = cfg.coverage.n_grid.iter().map(|&n| tag_coverage(kappa, &tags, &cats, n)).collect();
            curve(label, Metric::Tag, &grid, values)
        })
        .collect()
}

fn report_base(cfg: &Config, fingerprint: Option<String>, kappa: TagCountMatrix) -> CoverageReport {
    CoverageReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        fingerprint,
        config: cfg.echo(),
        dataset: None,
        category_counts: BTreeMap::new(),
        kappa,
        curves: Vec::new(),
        notes: Vec::new(),
    }
}

/// Tag coverage straight from a tag-by-category count file.
pub fn from_kappa_file(cfg: &Config, path: &Path) -> Result<CoverageReport> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let kappa = TagCountMatrix::read_csv(f).with_context(|| path.display().to_string())?;
    let mut r = report_base(cfg, None, kappa);
    r.curves = tag_curves(cfg, &r.kappa)?;
    if cfg.coverage.time || !cfg.coverage.box_curves.is_empty() {
        r.notes
            .push("time and actor metrics need trajectory data and were skipped for a tag-count input".into());
    }
    Ok(r)
}

pub struct LoadedStore {
    pub index: StoreIndex,
    pub recordings: Vec<RecordingScenarios>,
}

pub fn load_store(dir: &Path, fingerprint: &str, exec: Exec) -> Result<LoadedStore> {
    let index = read_index(dir)?;
    crate::store::check_fingerprint(&index.fingerprint, fingerprint, &dir.join(crate::store::INDEX_FILE))?;
    if index.recordings.is_empty() {
        bail!("{}: the scenario store holds no recordings", dir.display());
    }
    let loaded = exec.map(&index.recordings, |r| read_recording(&dir.join(&r.file), fingerprint));
    let recordings = loaded.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(LoadedStore { index, recordings })
}

pub fn from_store(cfg: &Config, store: &LoadedStore, exec: Exec, timings: &mut Timings) -> Result<CoverageReport> {
    let fingerprint = store.index.fingerprint.clone();
    let scenarios: Vec<&Scenario> = store.recordings.iter().flat_map(|r| &r.scenarios).collect();
    let egos: Vec<EgoFrames> = store.recordings.iter().flat_map(|r| r.egos.iter().copied()).collect();

    let t = std::time::Instant::now();
    let kappa = build_tag_count_matrix(scenarios.iter().copied(), &Tag::ALL, &ScenarioCategory::ALL);
    let mut r = report_base(cfg, Some(fingerprint), kappa);
    let (counts, catch_all) = category_counts(scenarios.iter().copied());
    for c in ScenarioCategory::ALL {
        r.category_counts.insert(c.symbol().to_string(), counts[c.index()]);
    }
    if cfg.mining.catch_all {
        r.category_counts.insert(ScenarioClass::NO_LEADER_SYMBOL.to_string(), catch_all);
    }
    r.dataset = Some(DatasetSummary {
        recordings: store.recordings.len(),
        ego_datasets: egos.len(),
        total_frames: egos.iter().map(EgoFrames::frame_count).sum(),
        scenarios: scenarios.len(),
    });
    r.curves = tag_curves(cfg, &r.kappa)?;
    timings.insert("tag".into(), t.elapsed().as_secs_f64());

    if cfg.coverage.time {
        let t = std::time::Instant::now();
        let mut hist = TimeHistogram::default();
        for rec in &store.recordings {
            hist.merge(&time_histogram(&rec.egos, &rec.scenarios));
        }
        let grid: Vec<f64> = cfg.coverage.n_grid.iter().map(|&n| n as f64).collect();
        let values = cfg.coverage.n_grid.iter().map(|&n| hist.coverage(n)).collect();
        r.curves.push(curve("time".into(), Metric::Time, &grid, values)?);
        timings.insert("time".into(), t.elapsed().as_secs_f64());
    }

    if !cfg.coverage.box_curves.is_empty() {
        let t = std::time::Instant::now();
        r.curves.extend(actor_curves(cfg, store, exec)?);
        timings.insert("actor".into(), t.elapsed().as_secs_f64());
    }
    Ok(r)
}

/// Actor metrics need the per-frame ego views, so every recording is
/// ingested again from its source and checked against the stored egos.
fn actor_curves(cfg: &Config, store: &LoadedStore, exec: Exec) -> Result<Vec<ReportCurve>> {
    let boxes: Vec<_> = cfg.coverage.box_curves.iter().flat_map(|c| c.boxes()).collect();
    let membership = cfg.coverage.actors;
    let per_recording = exec.map(&store.index.recordings, |entry| -> Result<Vec<ActorAccumulator>> {
        let paths = RecordingPaths::from_any(&entry.source)
            .with_context(|| format!("{}: not a recording path", entry.source.display()))?;
        let (rec, _) = parse_recording(&paths)?;
        let views = generate_ego_views_with(&rec, &cfg.ego_view, exec).datasets;
        let stored = store
            .recordings
            .iter()
            .find(|r| r.recording == entry.id)
            .expect("loaded with the index");
        let egos: Vec<EgoFrames> = views.iter().map(EgoFrames::of).collect();
        if egos != stored.egos {
            bail!("{}: recording changed since it was mined", entry.source.display());
        }
        Ok(actor_accumulators(&views, &stored.scenarios, &boxes, membership, exec))
    });
    let mut total = vec![ActorAccumulator::default(); boxes.len()];
    for accs in per_recording {
        for (t, a) in total.iter_mut().zip(accs?) {
            t.merge(&a);
        }
    }

    let mut curves = Vec::new();
    let mut offset = 0;
    for spec in &cfg.coverage.box_curves {
        let accs = &total[offset..offset + spec.long_front.len()];
        offset += spec.long_front.len();
        let label = spec.label();
        curves.push(curve(
            label.clone(),
            Metric::Actor,
            &spec.long_front,
            accs.iter().map(|a| a.actor_coverage()).collect(),
        )?);
        curves.push(curve(
            label,
            Metric::ActorOverTime,
            &spec.long_front,
            accs.iter().map(|a| a.actor_over_time_coverage()).collect(),
        )?);
    }
    Ok(curves)
}

pub fn curve_file_name(c: &ReportCurve) -> String {
    let label: String = c
        .label
        .chars()
        .map(|ch| if ch.is_ascii_alphanumeric() || ch == '.' || ch == '-' { ch } else { '_' })
        .collect();
    format!("{}__{label}.csv", c.metric.name())
}

pub fn curve_csv(c: &ReportCurve) -> String {
    let mut s = String::from("param,value\n");
    for p in &c.points {
        writeln!(s, "{},{}", p.param, p.value).unwrap();
    }
    s
}

pub fn summary_text(r: &CoverageReport) -> String {
    let mut s = String::new();
    writeln!(s, "coverage report (tool {})", r.version).unwrap();
    match &r.fingerprint {
        Some(fp) => writeln!(s, "config fingerprint: {fp}").unwrap(),
        None => writeln!(s, "source: tag-count file").unwrap(),
    }
    if let Some(d) = &r.dataset {
        writeln!(
            s,
            "dataset: {} recordings, {} ego datasets, {} frames, {} scenarios",
            d.recordings, d.ego_datasets, d.total_frames, d.scenarios
        )
        .unwrap();
    }
    if !r.category_counts.is_empty() {
        let counts: Vec<String> = r.category_counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(s, "scenarios per category: {}", counts.join(" ")).unwrap();
    }
    if r.curves.is_empty() {
        writeln!(s, "no metrics requested").unwrap();
    }
    for c in &r.curves {
        let pts: Vec<String> = c.points.iter().map(|p| format!("{}={:.4}", p.param, p.value)).collect();
        write!(s, "{} [{}]: {}", c.metric.name(), c.label, pts.join(" ")).unwrap();
        if !c.undefined.is_empty() {
            let u: Vec<String> = c.undefined.iter().map(|p| p.to_string()).collect();
            write!(s, " (undefined at {}={})", c.metric.param(), u.join(",")).unwrap();
        }
        s.push('\n');
    }
    for n in &r.notes {
        writeln!(s, "note: {n}").unwrap();
    }
    s
}

/// Writes one `param,value` CSV per curve under `dir/curves` and
/// `dir/summary.txt`; returns the summary.
pub fn render(r: &CoverageReport, dir: &Path) -> Result<String> {
    let curves_dir = dir.join("curves");
    std::fs::create_dir_all(&curves_dir).with_context(|| format!("creating {}", curves_dir.display()))?;
    for c in &r.curves {
        let path = curves_dir.join(curve_file_name(c));
        std::fs::write(&path, curve_csv(c)).with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = summary_text(r);
    std::fs::write(dir.join("summary.txt"), &summary)
        .with_context(|| format!("writing {}", dir.join("summary.txt").display()))?;
    Ok(summary)
}
