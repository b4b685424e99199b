//! Acceptance gate. Each test checks one criterion, writes a single
//! `criterion N: PASS|FAIL` line straight to stderr (visible without
//! `--nocapture`) and then asserts.
//!
//! The HighD reproduction check (criterion 9) needs the licensed dataset
//! and is not part of this target; see the README.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use coverage_core::coverage::{
    select_actors, tag_coverage, tag_coverage_ratio, time_coverage, ActorAccumulator, ActorBoxSpec, ActorMembership,
    EgoFrames,
};
use coverage_core::ego_view::EgoDataset;
use coverage_core::model::{Recording, Scenario, ScenarioCategory, Tag};
use coverage_core::pipeline::{mine_prepared, prepare, PipelineParams};
use coverage_core::synth::random::{random_corpus, random_script, RandomOptions};
use coverage_core::synth::{fixtures, generate, oracle};
use coverage_core::tagging::{build_tag_count_matrix, TagCountMatrix, TagGroup};
use coverage_core::Exec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_REL_TOL: f64 = 1e-12;
const RECALL_TOLERANCE_S: f64 = 0.5;

fn report(n: u32, ok: bool, elapsed: Duration, detail: &str) {
    let line = format!(
        "criterion {n}: {} ({:.2}s) {detail}\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

/// Records the outcome of `check` (failures listed in `problems`) and
/// asserts it together with the runtime bound.
fn gate(n: u32, limit: Duration, check: impl FnOnce(&mut Vec<String>) -> String) {
    let t = Instant::now();
    let mut problems = Vec::new();
    let detail = check(&mut problems);
    let elapsed = t.elapsed();
    if elapsed > limit {
        problems.push(format!("runtime {:.2}s exceeds {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()));
    }
    let ok = problems.is_empty();
    let shown: Vec<&String> = problems.iter().take(5).collect();
    report(n, ok, elapsed, &if ok { detail } else { format!("{detail}; {shown:?}") });
    assert!(ok, "criterion {n}: {problems:#?}");
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= ORACLE_REL_TOL * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn table_matrix() -> TagCountMatrix {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/highd_tag_counts.csv");
    TagCountMatrix::read_csv(std::fs::File::open(path).unwrap()).unwrap()
}

struct Mined {
    views: Vec<EgoDataset>,
    egos: Vec<EgoFrames>,
    scenarios: Vec<Scenario>,
}

fn mine(r: &Recording, params: &PipelineParams) -> Mined {
    let p = prepare(r, params, Exec::Sequential);
    let m = mine_prepared(&p, params, Exec::Sequential);
    Mined {
        views: p.views,
        egos: m.egos,
        scenarios: m.scenarios,
    }
}

fn small_options() -> RandomOptions {
    RandomOptions {
        duration: 10.0,
        vehicles: 8,
        spread: 150.0,
        ..Default::default()
    }
}

fn box_grid() -> Vec<ActorBoxSpec> {
    let mut out = Vec::new();
    for front in [20.0, 50.0, 100.0] {
        for lat in [1.5, 5.0, 8.5] {
            out.push(ActorBoxSpec {
                long_front: front,
                long_rear: front,
                lat_halfwidth: lat,
            });
        }
    }
    out
}

#[test]
fn criterion_1_table_fixture_saturates() {
    gate(1, Duration::from_secs(1), |problems| {
        let m = table_matrix();
        let all = tag_coverage_ratio(&m, &Tag::ALL, &ScenarioCategory::ALL, 10).unwrap();
        if all.num != all.den || all.value() != 1.0 {
            problems.push(format!("n=10 over all cells: {}/{}", all.num, all.den));
        }
        let subset: Vec<Tag> = ["t1", "t2", "t10", "t11", "t12", "t13", "t14"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let sub = tag_coverage_ratio(&m, &subset, &ScenarioCategory::ALL, 100).unwrap();
        if sub.num != sub.den || sub.value() != 1.0 {
            problems.push(format!("n=100 over {subset:?}: {}/{}", sub.num, sub.den));
        }
        format!("C(10)={} over 18x10, C(100)={} over 7 tags", all.value(), sub.value())
    });
}

#[test]
fn criterion_2_table_fixture_curve_is_monotone() {
    gate(2, Duration::from_secs(1), |problems| {
        let m = table_matrix();
        let grid = [1u64, 10, 100, 1000, 10000];
        let values: Vec<f64> = grid
            .iter()
            .map(|&n| tag_coverage(&m, &Tag::ALL, &ScenarioCategory::ALL, n).unwrap())
            .collect();
        if values[0] != 1.0 {
            problems.push(format!("C(1) = {}", values[0]));
        }
        for w in values.windows(2) {
            if w[1] > w[0] {
                problems.push(format!("increase {} -> {}", w[0], w[1]));
            }
        }
        for (&n, &v) in grid.iter().zip(&values) {
            let o = oracle::tag_coverage(&m, &Tag::ALL, &ScenarioCategory::ALL, n).unwrap();
            if (v - o).abs() > 1e-12 || v.is_nan() {
                problems.push(format!("n={n}: {v} vs oracle {o}"));
            }
        }
        format!("values {values:?}")
    });
}

#[test]
fn criterion_3_catch_all_covers_all_time() {
    gate(3, Duration::from_secs(10), |problems| {
        let mut params = PipelineParams::default();
        params.mining.catch_all = true;
        let mut corpora: Vec<(String, Vec<Recording>)> = fixtures::catalog()
            .into_iter()
            .map(|f| (f.script.name.clone(), vec![generate(&f.script).unwrap().0]))
            .collect();
        for seed in 0..5 {
            let rs = random_corpus(seed, 3, &RandomOptions::default());
            corpora.push((format!("random-{seed}"), rs.iter().map(|s| generate(s).unwrap().0).collect()));
        }
        let big_opts = RandomOptions {
            vehicles: 14,
            ..Default::default()
        };
        let big: Vec<Recording> = random_corpus(99, 8, &big_opts).iter().map(|s| generate(s).unwrap().0).collect();
        corpora.push(("random-large".into(), big));

        let mut large_egos = 0;
        let mut large_time = Duration::ZERO;
        for (name, recs) in &corpora {
            let t = Instant::now();
            let mut egos = Vec::new();
            let mut scenarios = Vec::new();
            for r in recs {
                let m = mine(r, &params);
                egos.extend(m.egos);
                scenarios.extend(m.scenarios);
            }
            match time_coverage(&egos, &scenarios, 1) {
                Ok(1.0) => {}
                other => problems.push(format!("{name}: time_coverage(1) = {other:?}")),
            }
            if name == "random-large" {
                large_egos = egos.len();
                large_time = t.elapsed();
            }
        }
        if large_egos < 100 {
            problems.push(format!("large corpus has only {large_egos} ego datasets"));
        }
        format!(
            "{} corpora; {large_egos}-ego corpus in {:.2}s",
            corpora.len(),
            large_time.as_secs_f64()
        )
    });
}

#[test]
fn criterion_4_actor_over_time_is_dominated() {
    gate(4, Duration::from_secs(120), |problems| {
        let params = PipelineParams::default();
        let boxes = box_grid();
        let mut checked = 0;
        let mut empty = 0;
        for seed in 0..50u64 {
            let recs: Vec<Recording> =
                random_corpus(1000 + seed, 2, &RandomOptions::default()).iter().map(|s| generate(s).unwrap().0).collect();
            let mined: Vec<Mined> = recs.iter().map(|r| mine(r, &params)).collect();
            for spec in &boxes {
                for membership in [ActorMembership::Main, ActorMembership::All] {
                    let mut acc = ActorAccumulator::default();
                    for m in &mined {
                        let sel = select_actors(&m.views, spec).unwrap();
                        acc.merge(&ActorAccumulator::from_selection(&sel, &m.scenarios, membership));
                    }
                    match (acc.actor_coverage(), acc.actor_over_time_coverage()) {
                        (Ok(a), Ok(at)) => {
                            checked += 1;
                            if at > a {
                                problems.push(format!("seed {seed} {} {}: {at} > {a}", spec.label(), membership.name()));
                            }
                        }
                        _ => empty += 1,
                    }
                }
            }
        }
        format!("{checked} (corpus, box, membership) cases, 0 violations, {empty} with no actors in the box")
    });
}

fn random_matrix(rng: &mut ChaCha8Rng) -> TagCountMatrix {
    let mut m = TagCountMatrix::zeros(&Tag::ALL, &ScenarioCategory::ALL);
    for c in &mut m.counts {
        *c = rng.random_range(0..40);
    }
    m
}

fn random_subset<T: Copy>(rng: &mut ChaCha8Rng, all: &[T]) -> Vec<T> {
    loop {
        let s: Vec<T> = all.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

#[test]
fn criterion_5_metrics_match_oracles() {
    gate(5, Duration::from_secs(60), |problems| {
        let boxes = [
            ActorBoxSpec { long_front: 15.0, long_rear: 0.0, lat_halfwidth: 2.0 },
            ActorBoxSpec { long_front: 50.0, long_rear: 25.0, lat_halfwidth: 5.0 },
            ActorBoxSpec { long_front: 100.0, long_rear: 100.0, lat_halfwidth: 9.0 },
        ];
        let mut compared = BTreeMap::<&str, usize>::new();
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut params = PipelineParams::default();
            params.mining.catch_all = seed % 2 == 0;
            let (r, _) = generate(&random_script(seed, 1 + (seed % 7) as u32, &small_options())).unwrap();
            let m = mine(&r, &params);

            let mined_kappa = build_tag_count_matrix(&m.scenarios, &Tag::ALL, &ScenarioCategory::ALL);
            for kappa in [random_matrix(&mut rng), mined_kappa] {
                let tags = random_subset(&mut rng, &Tag::ALL);
                let cats = random_subset(&mut rng, &ScenarioCategory::ALL);
                let n = rng.random_range(1..60);
                let a = tag_coverage(&kappa, &tags, &cats, n).unwrap();
                let b = oracle::tag_coverage(&kappa, &tags, &cats, n).unwrap();
                *compared.entry("tag").or_default() += 1;
                if !rel_close(a, b) {
                    problems.push(format!("seed {seed} tag n={n}: {a} vs {b}"));
                }
            }

            let frames: Vec<_> = m.egos.iter().map(|e| (e.key, e.first_frame, e.last_frame)).collect();
            for n in [1, 2, 3, 5] {
                match (time_coverage(&m.egos, &m.scenarios, n), oracle::time_coverage(&frames, &m.scenarios, n)) {
                    (Ok(a), Ok(b)) if rel_close(a, b) => *compared.entry("time").or_default() += 1,
                    (Err(a), Err(b)) if a == b => {}
                    (a, b) => problems.push(format!("seed {seed} time n={n}: {a:?} vs {b:?}")),
                }
            }

            for spec in &boxes {
                let sel = select_actors(&m.views, spec).unwrap();
                for membership in [ActorMembership::Main, ActorMembership::All] {
                    let acc = ActorAccumulator::from_selection(&sel, &m.scenarios, membership);
                    let pairs = [
                        ("actor", acc.actor_coverage(), oracle::actor_coverage(&m.views, &m.scenarios, spec, membership)),
                        (
                            "actor-over-time",
                            acc.actor_over_time_coverage(),
                            oracle::actor_over_time_coverage(&m.views, &m.scenarios, spec, membership),
                        ),
                    ];
                    for (name, a, b) in pairs {
                        match (a, b) {
                            (Ok(a), Ok(b)) if rel_close(a, b) => *compared.entry(name).or_default() += 1,
                            (Err(a), Err(b)) if a == b => {}
                            (a, b) => problems.push(format!("seed {seed} {name} {}: {a:?} vs {b:?}", spec.label())),
                        }
                    }
                }
            }
        }
        for metric in ["tag", "time", "actor", "actor-over-time"] {
            if compared.get(metric).copied().unwrap_or(0) == 0 {
                problems.push(format!("no defined {metric} values were compared"));
            }
        }
        format!("100 inputs, defined comparisons per metric {compared:?}")
    });
}

#[test]
fn criterion_6_planted_scenarios_are_recalled() {
    gate(6, Duration::from_secs(60), |problems| {
        let params = PipelineParams::default();
        let catalog = fixtures::catalog();
        let mut planted = 0;
        let mut per_category = [0usize; 10];
        for f in &catalog {
            let (r, truth) = generate(&f.script).unwrap();
            let m = mine(&r, &params);
            if truth.actor_free && !m.scenarios.is_empty() {
                problems.push(format!("{}: {} detections in an actor-free fixture", f.script.name, m.scenarios.len()));
            }
            planted += truth.planted.len();
            for p in &truth.planted {
                per_category[p.category.index()] += 1;
            }
            for p in truth.unmatched(&m.scenarios, &m.egos, RECALL_TOLERANCE_S) {
                problems.push(format!("{}: missed {:?}", f.script.name, p));
            }
        }
        if let Some(i) = per_category.iter().position(|&c| c < 3) {
            problems.push(format!("{} has only {} fixtures", ScenarioCategory::ALL[i], per_category[i]));
        }
        let free = catalog.iter().filter(|f| f.script.actor_free).count();
        format!("{planted} planted scenarios recalled within {RECALL_TOLERANCE_S}s, {free} actor-free fixtures clean")
    });
}

fn metric_values(m: &Mined, tag_sets: &[Vec<Tag>], boxes: &[ActorBoxSpec]) -> Vec<Option<f64>> {
    let kappa = build_tag_count_matrix(&m.scenarios, &Tag::ALL, &ScenarioCategory::ALL);
    let mut out = Vec::new();
    for tags in tag_sets {
        for n in [1, 2, 5] {
            out.push(tag_coverage(&kappa, tags, &ScenarioCategory::ALL, n).ok());
        }
    }
    for n in [1, 2, 3] {
        out.push(time_coverage(&m.egos, &m.scenarios, n).ok());
    }
    for spec in boxes {
        let sel = select_actors(&m.views, spec).unwrap();
        for membership in [ActorMembership::Main, ActorMembership::All] {
            let acc = ActorAccumulator::from_selection(&sel, &m.scenarios, membership);
            out.push(acc.actor_coverage().ok());
            out.push(acc.actor_over_time_coverage().ok());
        }
    }
    out
}

#[test]
fn criterion_7_mirroring_swaps_sides_only() {
    gate(7, Duration::from_secs(30), |problems| {
        let params = PipelineParams::default();
        let mut scripts: Vec<_> = fixtures::catalog().into_iter().map(|f| f.script).collect();
        scripts.extend((0..10).map(|seed| random_script(500 + seed, 200 + seed as u32, &RandomOptions::default())));
        let tag_sets: Vec<Vec<Tag>> = TagGroup::ALL
            .iter()
            .map(|g| g.tags().to_vec())
            .chain([
                ["t5", "t7", "t9", "t17"].iter().map(|s| s.parse().unwrap()).collect(),
                ["t6", "t10", "t18"].iter().map(|s| s.parse().unwrap()).collect(),
            ])
            .collect();
        let mirrored_sets: Vec<Vec<Tag>> = tag_sets.iter().map(|s| s.iter().map(|t| t.mirrored()).collect()).collect();
        // boxes are symmetric about the ego's heading, so they mirror onto themselves
        let boxes = box_grid();
        let mut swapped_cells = 0u64;
        for s in &scripts {
            let (r, _) = generate(s).unwrap();
            let a = mine(&r, &params);
            let b = mine(&r.mirrored(), &params);
            let ka = build_tag_count_matrix(&a.scenarios, &Tag::ALL, &ScenarioCategory::ALL);
            let kb = build_tag_count_matrix(&b.scenarios, &Tag::ALL, &ScenarioCategory::ALL);
            for t in Tag::ALL {
                for c in ScenarioCategory::ALL {
                    if ka.get(t, c) != kb.get(t.mirrored(), c) {
                        problems.push(format!("{}: kappa({t},{c}) = {:?} but mirrored {:?}", s.name, ka.get(t, c), kb.get(t.mirrored(), c)));
                    }
                    if t != t.mirrored() {
                        swapped_cells += ka.get(t, c).unwrap();
                    }
                }
            }
            let va = metric_values(&a, &tag_sets, &boxes);
            let vb = metric_values(&b, &mirrored_sets, &boxes);
            if va != vb {
                problems.push(format!("{}: metric values differ after mirroring", s.name));
            }
        }
        format!("{} recordings, {swapped_cells} side-tag counts swapped exactly", scripts.len())
    });
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_odd-coverage")
}

fn run(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timings.json" {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_8_outputs_do_not_depend_on_workers() {
    gate(8, Duration::from_secs(120), |problems| {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        let data_s = data.to_str().unwrap();
        if let Err(e) = run(&["synth", "--out", data_s, "--random", "4", "--seed", "11", "--vehicles", "16"]) {
            problems.push(e);
            return String::new();
        }
        let mut outputs = Vec::new();
        for (tag, workers) in [("w1", "1"), ("w4", "4"), ("w4-again", "4")] {
            let out = tmp.path().join(tag);
            let out_s = out.to_str().unwrap();
            let common = ["-o", out_s, "-w", workers, "--catch-all"];
            let mine: Vec<&str> = ["mine", "-i", data_s].iter().copied().chain(common).collect();
            let cov: Vec<&str> = ["coverage"].iter().copied().chain(common).collect();
            for args in [mine, cov] {
                if let Err(e) = run(&args) {
                    problems.push(e);
                    return String::new();
                }
            }
            outputs.push((tag, files_under(&out)));
        }
        let (_, reference) = &outputs[0];
        for (tag, files) in &outputs[1..] {
            if files != reference {
                let differing: Vec<_> = reference
                    .keys()
                    .chain(files.keys())
                    .filter(|k| reference.get(*k) != files.get(*k))
                    .collect();
                problems.push(format!("{tag} differs from w1 in {differing:?}"));
            }
        }
        let bytes: usize = reference.values().map(Vec::len).sum();
        format!("{} files ({bytes} bytes) identical across 1 and 4 workers and a rerun", reference.len())
    });
}
