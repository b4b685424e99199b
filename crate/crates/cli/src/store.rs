//! On-disk scenario store: `store.json` plus one `scenarios/NN.jsonl` per
//! recording (a header line, the ego datasets, then the scenarios).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use coverage_core::coverage::EgoFrames;
use coverage_core::ego_view::EgoViewSummary;
use coverage_core::model::{RecordingId, Scenario};
use serde::{Deserialize, Serialize};

pub const STORE_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "store.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreIndex {
    pub version: u32,
    pub fingerprint: String,
    pub recordings: Vec<StoredRecording>,
    pub errors: Vec<RecordingError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecording {
    pub id: RecordingId,
    /// The recording's `NN_tracks.csv`.
    pub source: PathBuf,
    /// Relative to the store directory.
    pub file: PathBuf,
    pub summary: EgoViewSummary,
    pub frames: u64,
    pub scenarios: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingError {
    pub source: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Header { recording: RecordingId, fingerprint: String },
    Ego(EgoFrames),
    Scenario(Scenario),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordingScenarios {
    pub recording: RecordingId,
    pub egos: Vec<EgoFrames>,
    pub scenarios: Vec<Scenario>,
}

pub fn scenario_file(id: RecordingId) -> PathBuf {
    PathBuf::from("scenarios").join(format!("{:02}.jsonl", id.0))
}

pub fn write_recording(dir: &Path, fingerprint: &str, rec: &RecordingScenarios) -> Result<PathBuf> {
    let rel = scenario_file(rec.recording);
    let path = dir.join(&rel);
    std::fs::create_dir_all(path.parent().unwrap()).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    let header = Line::Header {
        recording: rec.recording,
        fingerprint: fingerprint.to_string(),
    };
    let lines = std::iter::once(header)
        .chain(rec.egos.iter().map(|e| Line::Ego(*e)))
        .chain(rec.scenarios.iter().cloned().map(Line::Scenario));
    for line in lines {
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(rel)
}

pub fn read_recording(path: &Path, fingerprint: &str) -> Result<RecordingScenarios> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out: Option<RecordingScenarios> = None;
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        match (parsed, out.as_mut()) {
            (Line::Header { recording, fingerprint: fp }, None) => {
                check_fingerprint(&fp, fingerprint, path)?;
                out = Some(RecordingScenarios {
                    recording,
                    egos: Vec::new(),
                    scenarios: Vec::new(),
                });
            }
            (Line::Ego(e), Some(r)) => r.egos.push(e),
            (Line::Scenario(s), Some(r)) => {
                if s.recording != r.recording {
                    bail!("{}:{}: scenario of recording {} in file of recording {}", path.display(), i + 1, s.recording, r.recording);
                }
                r.scenarios.push(s)
            }
            _ => bail!("{}:{}: expected a single header line first", path.display(), i + 1),
        }
    }
    out.with_context(|| format!("{}: empty scenario file", path.display()))
}

pub fn check_fingerprint(found: &str, expected: &str, source: &Path) -> Result<()> {
    if found != expected {
        bail!(
            "{} was mined with configuration fingerprint {found}, but the current configuration has fingerprint {expected}",
            source.display()
        );
    }
    Ok(())
}

pub fn write_index(dir: &Path, index: &StoreIndex) -> Result<()> {
    write_json(&dir.join(INDEX_FILE), index)
}

pub fn read_index(dir: &Path) -> Result<StoreIndex> {
    let path = dir.join(INDEX_FILE);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading scenario store {}", path.display()))?;
    let index: StoreIndex = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if index.version != STORE_VERSION {
        bail!("{}: unsupported store version {}", path.display(), index.version);
    }
    Ok(index)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use coverage_core::model::{EgoKey, ScenarioClass, ScenarioCategory, TrackId};

    #[test]
    fn recording_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let key = EgoKey {
            recording: RecordingId(3),
            ego: TrackId(7),
        };
        let rec = RecordingScenarios {
            recording: RecordingId(3),
            egos: vec![EgoFrames {
                key,
                first_frame: 1,
                last_frame: 90,
            }],
            scenarios: vec![Scenario {
                category: ScenarioClass::Category(ScenarioCategory::C4),
                recording: RecordingId(3),
                ego: TrackId(7),
                start_frame: 10,
                end_frame: 60,
                main_actors: [TrackId(8)].into(),
                actors: [TrackId(8), TrackId(9)].into(),
                tags: Default::default(),
            }],
        };
        let rel = write_recording(dir.path(), "abc", &rec).unwrap();
        assert_eq!(rel, PathBuf::from("scenarios/03.jsonl"));
        assert_eq!(read_recording(&dir.path().join(&rel), "abc").unwrap(), rec);
        let err = read_recording(&dir.path().join(&rel), "def").unwrap_err().to_string();
        assert!(err.contains("abc") && err.contains("def"), "{err}");
    }
}
