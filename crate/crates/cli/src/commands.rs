use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use coverage_core::coverage::EgoFrames;
use coverage_core::highd::{parse_recording, validate_recording, RecordingPaths};
use coverage_core::pipeline::{mine_recording, MinedRecording};
use coverage_core::synth::fixtures::catalog;
use coverage_core::synth::random::{random_corpus, RandomOptions};
use coverage_core::synth::write_script;
use coverage_core::Exec;

use crate::config::{BoxCurveSpec, Config, TagCurveSpec};
use crate::report::{self, CoverageReport, Metric, Timings, REPORT_FILE, TIMINGS_FILE};
use crate::store::{self, RecordingError, RecordingScenarios, StoreIndex, StoredRecording, STORE_VERSION};
use crate::{CmdResult, Command, ConfigArgs, Failure, OrFail, SweepMetric};

pub fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::IngestCheck { config } => ingest_check(&load_config(&config)?),
        Command::Mine { config } => {
            let cfg = load_config(&config)?;
            with_workers(cfg.run.workers, |exec| mine(&cfg, exec).map(|_| ()))
        }
        Command::Coverage {
            config,
            store,
            kappa_file,
        } => {
            let cfg = load_config(&config)?;
            with_workers(cfg.run.workers, |exec| {
                coverage(&cfg, store.as_deref(), kappa_file.as_deref(), exec).map(|_| ())
            })
        }
        Command::Sweep {
            config,
            metric,
            grid,
            tags,
            categories,
            lat,
            include_rear,
            store,
            kappa_file,
            csv,
        } => {
            let mut cfg = load_config(&config)?;
            sweep_config(&mut cfg, metric, &grid, tags, categories, lat, include_rear)?;
            with_workers(cfg.run.workers, |exec| {
                let r = compute_report(&cfg, store.as_deref(), kappa_file.as_deref(), exec, &mut Timings::new())?;
                let curve = r
                    .curves
                    .iter()
                    .find(|c| c.metric == sweep_metric(metric))
                    .ok_or_else(|| Failure::Data(anyhow!("the requested metric could not be computed from this input")))?;
                if let Some(u) = curve.undefined.first() {
                    eprintln!("warning: metric undefined at {}={u} and further points", curve.metric.param());
                }
                let text = report::curve_csv(curve);
                match csv {
                    Some(path) => std::fs::write(&path, text)
                        .with_context(|| format!("writing {}", path.display()))
                        .data(),
                    None => std::io::stdout().write_all(text.as_bytes()).data(),
                }
            })
        }
        Command::Report { report, out } => render_report(&report, out.as_deref()),
        Command::Synth {
            out,
            random,
            seed,
            vehicles,
            duration,
        } => synth(&out, random, seed, vehicles, duration),
    }
}

pub fn load_config(args: &ConfigArgs) -> Result<Config, Failure> {
    let mut cfg = Config::load(args.config.as_deref(), &args.overrides).usage()?;
    if !args.input.is_empty() {
        cfg.input.paths = args.input.clone();
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if let Some(w) = args.workers {
        cfg.run.workers = w;
    }
    if args.catch_all {
        cfg.mining.catch_all = true;
    }
    cfg.validate().usage()?;
    Ok(cfg)
}

/// One worker runs everything sequentially; otherwise a dedicated pool of
/// the requested size (0 = rayon's default pool).
fn with_workers<R: Send>(workers: usize, f: impl FnOnce(Exec) -> R + Send) -> R {
    match workers {
        0 => f(Exec::Parallel),
        1 => f(Exec::Sequential),
        n => Exec::install(n, || f(Exec::Parallel)),
    }
}

fn has_glob_chars(s: &str) -> bool {
    s.contains(['*', '?', '['])
}

/// Expands input paths into recordings, sorted and deduplicated.
pub fn resolve_inputs(paths: &[String]) -> Result<Vec<RecordingPaths>, Failure> {
    let mut found = BTreeSet::new();
    let mut add_file = |p: &Path| -> Result<(), Failure> {
        let r = RecordingPaths::from_any(p)
            .ok_or_else(|| Failure::Usage(anyhow!("{}: not a HighD recording file", p.display())))?;
        found.insert(r.tracks_path);
        Ok(())
    };
    for item in paths {
        let path = Path::new(item);
        if path.is_dir() {
            for r in RecordingPaths::scan_dir(path).with_context(|| format!("reading {item}")).data()? {
                add_file(&r.tracks_path)?;
            }
        } else if path.is_file() {
            add_file(path)?;
        } else if has_glob_chars(item) {
            let matches = glob::glob(item).with_context(|| format!("invalid pattern `{item}`")).usage()?;
            for m in matches {
                let m = m.data()?;
                if m.is_dir() {
                    for r in RecordingPaths::scan_dir(&m).with_context(|| format!("reading {}", m.display())).data()? {
                        add_file(&r.tracks_path)?;
                    }
                } else {
                    add_file(&m)?;
                }
            }
        } else {
            return Err(Failure::Usage(anyhow!("input path {item} does not exist")));
        }
    }
    if found.is_empty() {
        return Err(Failure::Data(anyhow!("no recordings found in the input paths {paths:?}")));
    }
    Ok(found.iter().filter_map(|p| RecordingPaths::from_any(p)).collect())
}

fn ingest_check(cfg: &Config) -> CmdResult {
    let inputs = resolve_inputs(&cfg.input.paths)?;
    let mut failed = 0;
    for p in &inputs {
        let name = p.tracks_path.display();
        match parse_recording(p) {
            Ok((r, rep)) => {
                let violations = validate_recording(&r);
                println!(
                    "{name}: recording {}, {} tracks, {} frames, {} warnings, {} violations",
                    r.id,
                    rep.n_tracks,
                    rep.n_frames,
                    rep.warnings.len(),
                    violations.len()
                );
                for w in &rep.warnings {
                    println!("  warning: {w}");
                }
                for v in &violations {
                    println!("  violation: {v}");
                }
                if !violations.is_empty() {
                    failed += 1;
                }
            }
            Err(e) => {
                println!("{name}: error: {e}");
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(Failure::Data(anyhow!("{failed} of {} recordings failed the check", inputs.len())));
    }
    Ok(())
}

fn mine_one(p: &RecordingPaths, cfg: &Config, exec: Exec) -> anyhow::Result<MinedRecording> {
    let (r, _) = parse_recording(p)?;
    let violations = validate_recording(&r);
    if let Some(v) = violations.first() {
        bail!("invalid recording: {v}");
    }
    Ok(mine_recording(&r, &cfg.pipeline()?, exec))
}

pub fn mine(cfg: &Config, exec: Exec) -> Result<StoreIndex, Failure> {
    let inputs = resolve_inputs(&cfg.input.paths)?;
    let fingerprint = cfg.fingerprint().usage()?;
    let dir = &cfg.output.dir;
    let t = Instant::now();
    let mined = exec.map(&inputs, |p| mine_one(p, cfg, exec));

    let scenario_dir = dir.join("scenarios");
    std::fs::create_dir_all(&scenario_dir)
        .with_context(|| format!("creating {}", scenario_dir.display()))
        .data()?;
    // drop files from an earlier run so the store holds exactly this run
    for entry in std::fs::read_dir(&scenario_dir).data()? {
        let path = entry.data()?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            std::fs::remove_file(&path).data()?;
        }
    }

    let mut index = StoreIndex {
        version: STORE_VERSION,
        fingerprint: fingerprint.clone(),
        recordings: Vec::new(),
        errors: Vec::new(),
    };
    let mut ok: Vec<(&RecordingPaths, MinedRecording)> = Vec::new();
    for (p, m) in inputs.iter().zip(mined) {
        match m {
            Ok(m) => ok.push((p, m)),
            Err(e) => {
                eprintln!("{}: {e:#}", p.tracks_path.display());
                index.errors.push(RecordingError {
                    source: p.tracks_path.clone(),
                    error: format!("{e:#}"),
                });
            }
        }
    }
    let mut seen = BTreeSet::new();
    ok.sort_by_key(|(_, m)| m.egos.first().map(|e| e.key.recording));
    for (p, m) in ok {
        let id = match recording_id(p, &m) {
            Ok(id) => id,
            Err(e) => {
                index.errors.push(RecordingError {
                    source: p.tracks_path.clone(),
                    error: e.to_string(),
                });
                continue;
            }
        };
        if !seen.insert(id) {
            let error = format!("recording id {id} occurs more than once in the input");
            eprintln!("{}: {error}", p.tracks_path.display());
            index.errors.push(RecordingError {
                source: p.tracks_path.clone(),
                error,
            });
            continue;
        }
        let rec = RecordingScenarios {
            recording: id,
            egos: m.egos.clone(),
            scenarios: m.scenarios.clone(),
        };
        let file = store::write_recording(dir, &fingerprint, &rec).data()?;
        let frames = m.egos.iter().map(EgoFrames::frame_count).sum();
        println!(
            "recording {id}: {} ego datasets, {frames} ego frames, {} scenarios",
            m.summary.ego_datasets,
            m.scenarios.len()
        );
        index.recordings.push(StoredRecording {
            id,
            source: p.tracks_path.clone(),
            file,
            summary: m.summary,
            frames,
            scenarios: m.scenarios.len(),
        });
    }
    index.recordings.sort_by_key(|r| r.id);
    store::write_index(dir, &index).data()?;
    eprintln!(
        "mined {} recordings ({} failed) in {:.2}s",
        index.recordings.len(),
        index.errors.len(),
        t.elapsed().as_secs_f64()
    );
    if index.recordings.is_empty() {
        return Err(Failure::Data(anyhow!("no recording could be mined")));
    }
    Ok(index)
}

/// Recording id from the ego datasets, or from the file when there are none.
fn recording_id(p: &RecordingPaths, m: &MinedRecording) -> anyhow::Result<coverage_core::model::RecordingId> {
    if let Some(e) = m.egos.first() {
        return Ok(e.key.recording);
    }
    Ok(parse_recording(p)?.0.id)
}

pub fn compute_report(
    cfg: &Config,
    store_dir: Option<&Path>,
    kappa_file: Option<&Path>,
    exec: Exec,
    timings: &mut Timings,
) -> Result<CoverageReport, Failure> {
    if let Some(k) = kappa_file {
        return report::from_kappa_file(cfg, k).data();
    }
    let fingerprint = cfg.fingerprint().usage()?;
    let dir = store_dir.unwrap_or(&cfg.output.dir);
    let t = Instant::now();
    let loaded = report::load_store(dir, &fingerprint, exec).data()?;
    timings.insert("load".into(), t.elapsed().as_secs_f64());
    report::from_store(cfg, &loaded, exec, timings).data()
}

pub fn coverage(cfg: &Config, store_dir: Option<&Path>, kappa_file: Option<&Path>, exec: Exec) -> Result<CoverageReport, Failure> {
    let t = Instant::now();
    let mut timings = Timings::new();
    let r = compute_report(cfg, store_dir, kappa_file, exec, &mut timings)?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).data()?;
    store::write_json(&dir.join(REPORT_FILE), &r).data()?;
    timings.insert("total".into(), t.elapsed().as_secs_f64());
    store::write_json(&dir.join(TIMINGS_FILE), &timings).data()?;
    print!("{}", report::summary_text(&r));
    Ok(r)
}

fn sweep_metric(m: SweepMetric) -> Metric {
    match m {
        SweepMetric::Tag => Metric::Tag,
        SweepMetric::Time => Metric::Time,
        SweepMetric::Actor => Metric::Actor,
        SweepMetric::ActorOverTime => Metric::ActorOverTime,
    }
}

#[allow(clippy::too_many_arguments)]
fn sweep_config(
    cfg: &mut Config,
    metric: SweepMetric,
    grid: &[f64],
    tags: Vec<String>,
    categories: Vec<String>,
    lat: f64,
    include_rear: bool,
) -> CmdResult {
    let c = &mut cfg.coverage;
    c.tag_curves.clear();
    c.time = false;
    c.box_curves.clear();
    let or_all = |v: Vec<String>| if v.is_empty() { vec!["all".to_string()] } else { v };
    match metric {
        SweepMetric::Tag | SweepMetric::Time => {
            if !grid.is_empty() {
                c.n_grid = grid
                    .iter()
                    .map(|&n| {
                        if n >= 1.0 && n.fract() == 0.0 {
                            Ok(n as u64)
                        } else {
                            Err(Failure::Usage(anyhow!("grid value {n}: n must be a positive integer")))
                        }
                    })
                    .collect::<Result<_, _>>()?;
            }
            if metric == SweepMetric::Tag {
                c.tag_curves.push(TagCurveSpec {
                    label: "sweep".into(),
                    tags: or_all(tags),
                    categories: or_all(categories),
                });
            } else {
                c.time = true;
            }
        }
        SweepMetric::Actor | SweepMetric::ActorOverTime => {
            let long_front = if grid.is_empty() {
                (1..=10).map(|k| f64::from(k) * 10.0).collect()
            } else {
                grid.to_vec()
            };
            c.box_curves.push(BoxCurveSpec {
                label: None,
                lat_halfwidth: lat,
                include_rear,
                long_front,
            });
        }
    }
    cfg.validate().usage()
}

fn render_report(path: &Path, out: Option<&Path>) -> CmdResult {
    let r = CoverageReport::read(path).data()?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
    };
    let summary = report::render(&r, &dir).data()?;
    print!("{summary}");
    Ok(())
}

fn synth(out: &Path, random: Option<u32>, seed: u64, vehicles: usize, duration: f64) -> CmdResult {
    let scripts = match random {
        Some(n) => {
            if n == 0 || vehicles == 0 || duration.is_nan() || duration <= 0.0 {
                return Err(Failure::Usage(anyhow!("--random, --vehicles and --duration must be positive")));
            }
            let o = RandomOptions {
                vehicles,
                duration,
                ..Default::default()
            };
            random_corpus(seed, n, &o)
        }
        None => catalog().into_iter().map(|f| f.script).collect(),
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())).data()?;
    for s in &scripts {
        let (paths, truth) = write_script(s, out).data()?;
        let truth_path = out.join(format!("{:02}_truth.json", s.recording_id));
        store::write_json(&truth_path, &truth).data()?;
        println!("{}: {} ({} vehicles)", paths.tracks_path.display(), s.name, s.vehicles.len());
    }
    Ok(())
}
