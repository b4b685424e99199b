//! Reader and writer for the HighD CSV triple (`XX_recordingMeta.csv`,
//! `XX_tracksMeta.csv`, `XX_tracks.csv`).
//!
//! Positions in the files are bounding-box corners in image coordinates; the
//! model stores direction-normalized vehicle centers.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{
    Direction, LaneLayout, Recording, RecordingId, Track, TrackId, TrackState, VehicleClass,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordingPaths {
    pub meta_path: PathBuf,
    pub tracks_meta_path: PathBuf,
    pub tracks_path: PathBuf,
}

impl RecordingPaths {
    /// Paths of recording `prefix` (e.g. `"01"`) inside `dir`.
    pub fn in_dir(dir: &Path, prefix: &str) -> RecordingPaths {
        RecordingPaths {
            meta_path: dir.join(format!("{prefix}_recordingMeta.csv")),
            tracks_meta_path: dir.join(format!("{prefix}_tracksMeta.csv")),
            tracks_path: dir.join(format!("{prefix}_tracks.csv")),
        }
    }

    /// Derives the triple from the path of any of its three files.
    pub fn from_any(path: &Path) -> Option<RecordingPaths> {
        let name = path.file_name()?.to_str()?;
        let prefix = ["_recordingMeta.csv", "_tracksMeta.csv", "_tracks.csv"]
            .iter()
            .find_map(|suffix| name.strip_suffix(suffix))?;
        Some(RecordingPaths::in_dir(path.parent().unwrap_or(Path::new(".")), prefix))
    }

    /// All recordings in `dir`, ordered by file name.
    pub fn scan_dir(dir: &Path) -> std::io::Result<Vec<RecordingPaths>> {
        let mut prefixes = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            if let Some(prefix) = entry
                .file_name()
                .to_str()
                .and_then(|n| n.strip_suffix("_tracks.csv"))
            {
                prefixes.push(prefix.to_string());
            }
        }
        prefixes.sort();
        Ok(prefixes
            .iter()
            .map(|p| RecordingPaths::in_dir(dir, p))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestReport {
    pub recording_id: RecordingId,
    pub n_tracks: usize,
    pub n_frames: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: PathBuf, column: &'static str },
    #[error("{path}: record {record}: invalid value `{value}` in column `{column}`")]
    InvalidValue {
        path: PathBuf,
        record: usize,
        column: &'static str,
        value: String,
    },
    #[error("{path}: no data row")]
    EmptyMeta { path: PathBuf },
    #[error("track {track}: frame {next} follows frame {previous} (frames must be contiguous)")]
    FrameGap {
        track: TrackId,
        previous: u32,
        next: u32,
    },
    #[error("track {track}: unknown vehicle class `{value}`")]
    UnknownVehicleClass { track: TrackId, value: String },
    #[error("track {track}: unknown driving direction `{value}`")]
    UnknownDirection { track: TrackId, value: String },
    #[error("track {track}: present in tracks file but not in tracks meta file")]
    TrackWithoutMeta { track: TrackId },
    #[error("invalid lane markings: {0}")]
    InvalidLayout(String),
}

const TRACKS_REQUIRED: [&str; 11] = [
    "frame",
    "id",
    "x",
    "y",
    "width",
    "height",
    "xVelocity",
    "yVelocity",
    "xAcceleration",
    "yAcceleration",
    "laneId",
];

const TRACKS_NEIGHBOURS: [&str; 8] = [
    "precedingId",
    "followingId",
    "leftPrecedingId",
    "leftAlongsideId",
    "leftFollowingId",
    "rightPrecedingId",
    "rightAlongsideId",
    "rightFollowingId",
];

const TRACKS_OPTIONAL: [&str; 6] = [
    "frontSightDistance",
    "backSightDistance",
    "dhw",
    "thw",
    "ttc",
    "precedingXVelocity",
];

const TRACKS_META_REQUIRED: [&str; 5] = ["id", "width", "height", "class", "drivingDirection"];

const TRACKS_META_OPTIONAL: [&str; 11] = [
    "initialFrame",
    "finalFrame",
    "numFrames",
    "traveledDistance",
    "minXVelocity",
    "maxXVelocity",
    "meanXVelocity",
    "minDHW",
    "minTHW",
    "minTTC",
    "numLaneChanges",
];

const META_REQUIRED: [&str; 5] = [
    "id",
    "frameRate",
    "locationId",
    "upperLaneMarkings",
    "lowerLaneMarkings",
];

const META_OPTIONAL: [&str; 10] = [
    "speedLimit",
    "month",
    "weekDay",
    "startTime",
    "duration",
    "totalDrivenDistance",
    "totalDrivenTime",
    "numVehicles",
    "numCars",
    "numTrucks",
];

/// Column lookup for one CSV file.
struct Columns {
    path: PathBuf,
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(
        path: &Path,
        headers: &csv::StringRecord,
        required: &[&'static str],
        known: &[&[&'static str]],
        warnings: &mut Vec<String>,
    ) -> Result<Columns, IngestError> {
        let index: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        for column in required {
            if !index.contains_key(*column) {
                return Err(IngestError::MissingColumn {
                    path: path.to_path_buf(),
                    column,
                });
            }
        }
        let mut extra: Vec<&str> = headers
            .iter()
            .map(str::trim)
            .filter(|h| !required.contains(h) && !known.iter().any(|k| k.contains(h)))
            .collect();
        extra.sort_unstable();
        for column in extra {
            warnings.push(format!(
                "{}: ignoring unknown column `{column}`",
                path.display()
            ));
        }
        Ok(Columns {
            path: path.to_path_buf(),
            index,
        })
    }

    fn raw<'r>(&self, record: &'r csv::StringRecord, column: &'static str) -> &'r str {
        self.index
            .get(column)
            .and_then(|&i| record.get(i))
            .map_or("", str::trim)
    }

    fn has(&self, column: &str) -> bool {
        self.index.contains_key(column)
    }

    fn parse<T: std::str::FromStr>(
        &self,
        record: &csv::StringRecord,
        row: usize,
        column: &'static str,
    ) -> Result<T, IngestError> {
        let value = self.raw(record, column);
        value.parse().map_err(|_| IngestError::InvalidValue {
            path: self.path.clone(),
            record: row,
            column,
            value: value.to_string(),
        })
    }

    fn parse_f64(
        &self,
        record: &csv::StringRecord,
        row: usize,
        column: &'static str,
    ) -> Result<f64, IngestError> {
        let v: f64 = self.parse(record, row, column)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(IngestError::InvalidValue {
                path: self.path.clone(),
                record: row,
                column,
                value: self.raw(record, column).to_string(),
            })
        }
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn headers(reader: &mut csv::Reader<File>, path: &Path) -> Result<csv::StringRecord, IngestError> {
    reader.headers().cloned().map_err(|source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_markings(cols: &Columns, record: &csv::StringRecord, column: &'static str) -> Result<Vec<f64>, IngestError> {
    cols.raw(record, column)
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| IngestError::InvalidValue {
                path: cols.path.clone(),
                record: 1,
                column,
                value: s.to_string(),
            })
        })
        .collect()
}

struct Meta {
    id: RecordingId,
    frame_rate: f64,
    location_id: u32,
    duration: Option<f64>,
    layout: LaneLayout,
}

fn read_meta(path: &Path, warnings: &mut Vec<String>) -> Result<Meta, IngestError> {
    let mut reader = open_csv(path)?;
    let hdr = headers(&mut reader, path)?;
    let cols = Columns::new(path, &hdr, &META_REQUIRED, &[&META_OPTIONAL], warnings)?;
    let record = reader
        .records()
        .next()
        .ok_or_else(|| IngestError::EmptyMeta {
            path: path.to_path_buf(),
        })?
        .map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let id = RecordingId(cols.parse(&record, 1, "id")?);
    let frame_rate = cols.parse_f64(&record, 1, "frameRate")?;
    if frame_rate <= 0.0 {
        return Err(IngestError::InvalidValue {
            path: path.to_path_buf(),
            record: 1,
            column: "frameRate",
            value: frame_rate.to_string(),
        });
    }
    let location_id = cols.parse(&record, 1, "locationId")?;
    let duration = if cols.has("duration") {
        Some(cols.parse_f64(&record, 1, "duration")?)
    } else {
        None
    };
    let upper = parse_markings(&cols, &record, "upperLaneMarkings")?;
    let lower = parse_markings(&cols, &record, "lowerLaneMarkings")?;
    let layout = LaneLayout::from_highd_markings(&upper, &lower);
    if !layout.is_valid() {
        return Err(IngestError::InvalidLayout(format!(
            "upper {upper:?}, lower {lower:?}: need >= 2 strictly increasing markings per direction"
        )));
    }
    Ok(Meta {
        id,
        frame_rate,
        location_id,
        duration,
        layout,
    })
}

struct TrackMeta {
    class: VehicleClass,
    direction: Direction,
    length: f64,
    width: f64,
    num_frames: Option<usize>,
}

fn read_tracks_meta(
    path: &Path,
    warnings: &mut Vec<String>,
) -> Result<BTreeMap<TrackId, TrackMeta>, IngestError> {
    let mut reader = open_csv(path)?;
    let hdr = headers(&mut reader, path)?;
    let cols = Columns::new(
        path,
        &hdr,
        &TRACKS_META_REQUIRED,
        &[&TRACKS_META_OPTIONAL],
        warnings,
    )?;
    let mut out = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let id = TrackId(cols.parse(&record, row, "id")?);
        let class = match cols.raw(&record, "class") {
            c if c.eq_ignore_ascii_case("car") => VehicleClass::Car,
            c if c.eq_ignore_ascii_case("truck") => VehicleClass::Truck,
            other => {
                return Err(IngestError::UnknownVehicleClass {
                    track: id,
                    value: other.to_string(),
                })
            }
        };
        let direction = match cols.raw(&record, "drivingDirection") {
            "1" => Direction::Upper,
            "2" => Direction::Lower,
            other => {
                return Err(IngestError::UnknownDirection {
                    track: id,
                    value: other.to_string(),
                })
            }
        };
        let num_frames = if cols.has("numFrames") {
            Some(cols.parse(&record, row, "numFrames")?)
        } else {
            None
        };
        let meta = TrackMeta {
            class,
            direction,
            length: cols.parse_f64(&record, row, "width")?,
            width: cols.parse_f64(&record, row, "height")?,
            num_frames,
        };
        if out.insert(id, meta).is_some() {
            warnings.push(format!(
                "{}: duplicate tracks-meta entry for track {id}, keeping the last one",
                path.display()
            ));
        }
    }
    Ok(out)
}

/// Parses one recording into the model, normalizing both driving directions.
pub fn parse_recording(paths: &RecordingPaths) -> Result<(Recording, IngestReport), IngestError> {
    let mut warnings = Vec::new();
    let meta = read_meta(&paths.meta_path, &mut warnings)?;
    let tracks_meta = read_tracks_meta(&paths.tracks_meta_path, &mut warnings)?;

    let path = paths.tracks_path.as_path();
    let mut reader = open_csv(path)?;
    let hdr = headers(&mut reader, path)?;
    let cols = Columns::new(
        path,
        &hdr,
        &TRACKS_REQUIRED,
        &[&TRACKS_NEIGHBOURS, &TRACKS_OPTIONAL],
        &mut warnings,
    )?;
    let neighbour_columns: Vec<&'static str> = TRACKS_NEIGHBOURS
        .iter()
        .copied()
        .filter(|c| cols.has(c))
        .collect();

    let mut states: BTreeMap<TrackId, Vec<TrackState>> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    loop {
        let more = reader
            .read_record(&mut record)
            .map_err(|source| IngestError::Csv {
                path: path.to_path_buf(),
                source,
            })?;
        if !more {
            break;
        }
        row += 1;
        let id = TrackId(cols.parse(&record, row, "id")?);
        let tm = tracks_meta
            .get(&id)
            .ok_or(IngestError::TrackWithoutMeta { track: id })?;
        // neighbour relations are recomputed downstream; only check they parse
        for column in &neighbour_columns {
            let _: i64 = cols.parse(&record, row, column)?;
        }
        let corner_x = cols.parse_f64(&record, row, "x")?;
        let corner_y = cols.parse_f64(&record, row, "y")?;
        let bbox_w = cols.parse_f64(&record, row, "width")?;
        let bbox_h = cols.parse_f64(&record, row, "height")?;
        let cx = corner_x + bbox_w / 2.0;
        let cy = corner_y + bbox_h / 2.0;
        let vx = cols.parse_f64(&record, row, "xVelocity")?;
        let vy = cols.parse_f64(&record, row, "yVelocity")?;
        let ax = cols.parse_f64(&record, row, "xAcceleration")?;
        let ay = cols.parse_f64(&record, row, "yAcceleration")?;
        let state = match tm.direction {
            Direction::Upper => TrackState {
                frame: cols.parse(&record, row, "frame")?,
                x: -cx,
                y: cy,
                vx: -vx,
                vy,
                ax: -ax,
                ay,
                lane_id: cols.parse(&record, row, "laneId")?,
            },
            Direction::Lower => TrackState {
                frame: cols.parse(&record, row, "frame")?,
                x: cx,
                y: -cy,
                vx,
                vy: -vy,
                ax,
                ay: -ay,
                lane_id: cols.parse(&record, row, "laneId")?,
            },
        };
        states.entry(id).or_default().push(state);
    }

    let mut tracks = Vec::with_capacity(states.len());
    for (id, mut track_states) in states {
        track_states.sort_by_key(|s| s.frame);
        for w in track_states.windows(2) {
            if w[1].frame != w[0].frame + 1 {
                return Err(IngestError::FrameGap {
                    track: id,
                    previous: w[0].frame,
                    next: w[1].frame,
                });
            }
        }
        let tm = &tracks_meta[&id];
        if let Some(n) = tm.num_frames {
            if n != track_states.len() {
                warnings.push(format!(
                    "track {id}: tracks meta lists {n} frames, tracks file has {}",
                    track_states.len()
                ));
            }
        }
        tracks.push(Track {
            id,
            class: tm.class,
            direction: tm.direction,
            length: tm.length,
            width: tm.width,
            states: track_states,
        });
    }
    for id in tracks_meta.keys() {
        if !tracks.iter().any(|t| t.id == *id) {
            warnings.push(format!("track {id}: listed in tracks meta but has no rows"));
        }
    }
    if tracks.is_empty() {
        warnings.push(format!("{}: no track rows", path.display()));
    }

    let first_frame = tracks.iter().map(Track::first_frame).min().unwrap_or(1).min(1);
    let mut last_frame = tracks.iter().map(Track::last_frame).max().unwrap_or(1);
    if let Some(d) = meta.duration {
        last_frame = last_frame.max((d * meta.frame_rate).round() as u32);
    }

    let n_frames = tracks.iter().map(|t| t.states.len()).sum();
    let recording = Recording {
        id: meta.id,
        location_id: meta.location_id,
        frame_rate: meta.frame_rate,
        first_frame,
        last_frame,
        lane_layout: meta.layout,
        tracks,
    };
    let report = IngestReport {
        recording_id: recording.id,
        n_tracks: recording.tracks.len(),
        n_frames,
        warnings,
    };
    Ok((recording, report))
}

/// One invariant violation found by [`validate_recording`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveFrameRate(f64),
    InvalidLaneLayout,
    DuplicateTrackId(TrackId),
    EmptyTrack(TrackId),
    NonContiguousFrames { track: TrackId, frame: u32 },
    OutsideRecording { track: TrackId },
    UnknownLane { track: TrackId, frame: u32, lane_id: i32 },
    NonFinite { track: TrackId, frame: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveFrameRate(r) => write!(f, "frame rate {r} is not positive"),
            Violation::InvalidLaneLayout => write!(f, "lane layout is not strictly monotone"),
            Violation::DuplicateTrackId(id) => write!(f, "track id {id} is not unique"),
            Violation::EmptyTrack(id) => write!(f, "track {id} has no states"),
            Violation::NonContiguousFrames { track, frame } => {
                write!(f, "track {track}: frames not contiguous at {frame}")
            }
            Violation::OutsideRecording { track } => {
                write!(f, "track {track}: frames outside the recording range")
            }
            Violation::UnknownLane {
                track,
                frame,
                lane_id,
            } => write!(f, "track {track}: lane id {lane_id} at frame {frame} not in layout"),
            Violation::NonFinite { track, frame } => {
                write!(f, "track {track}: non-finite value at frame {frame}")
            }
        }
    }
}

/// All invariant violations of `r`; empty when valid.
pub fn validate_recording(r: &Recording) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(r.frame_rate > 0.0) {
        out.push(Violation::NonPositiveFrameRate(r.frame_rate));
    }
    if !r.lane_layout.is_valid() {
        out.push(Violation::InvalidLaneLayout);
    }
    let mut seen = HashSet::new();
    for track in &r.tracks {
        if !seen.insert(track.id) {
            out.push(Violation::DuplicateTrackId(track.id));
        }
        if track.states.is_empty() {
            out.push(Violation::EmptyTrack(track.id));
            continue;
        }
        if let Some(w) = track.states.windows(2).find(|w| w[1].frame != w[0].frame + 1) {
            out.push(Violation::NonContiguousFrames {
                track: track.id,
                frame: w[1].frame,
            });
        }
        if track.first_frame() < r.first_frame || track.last_frame() > r.last_frame {
            out.push(Violation::OutsideRecording { track: track.id });
        }
        if let Some(s) = track
            .states
            .iter()
            .find(|s| !r.lane_layout.contains_lane_id(track.direction, s.lane_id))
        {
            out.push(Violation::UnknownLane {
                track: track.id,
                frame: s.frame,
                lane_id: s.lane_id,
            });
        }
        if let Some(s) = track.states.iter().find(|s| {
            ![s.x, s.y, s.vx, s.vy, s.ax, s.ay]
                .iter()
                .all(|v| v.is_finite())
        }) {
            out.push(Violation::NonFinite {
                track: track.id,
                frame: s.frame,
            });
        }
    }
    out
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, IngestError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn join_markings(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Writes `r` as a HighD CSV triple named `{id:02}_*.csv` inside `dir`.
///
/// Floats are written in shortest round-trip form, so re-parsing reproduces
/// the model up to the corner/center conversion.
pub fn write_recording(r: &Recording, dir: &Path) -> Result<RecordingPaths, IngestError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let paths = RecordingPaths::in_dir(dir, &r.id.to_string());

    let (upper, lower) = r.lane_layout.to_highd_markings();
    let mut w = create(&paths.meta_path)?;
    let duration = f64::from(r.last_frame) / r.frame_rate;
    let n_cars = r.tracks.iter().filter(|t| t.class == VehicleClass::Car).count();
    writeln!(
        w,
        "id,frameRate,locationId,duration,numVehicles,numCars,numTrucks,upperLaneMarkings,lowerLaneMarkings"
    )
    .and_then(|_| {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.id.0,
            r.frame_rate,
            r.location_id,
            duration,
            r.tracks.len(),
            n_cars,
            r.tracks.len() - n_cars,
            join_markings(&upper),
            join_markings(&lower)
        )
    })
    .and_then(|_| w.flush())
    .map_err(io_err(&paths.meta_path))?;

    let mut w = create(&paths.tracks_meta_path)?;
    let result = (|| -> std::io::Result<()> {
        writeln!(
            w,
            "id,width,height,initialFrame,finalFrame,numFrames,class,drivingDirection,traveledDistance"
        )?;
        for t in &r.tracks {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                t.id.0,
                t.length,
                t.width,
                t.first_frame(),
                t.last_frame(),
                t.states.len(),
                t.class.as_str(),
                match t.direction {
                    Direction::Upper => 1,
                    Direction::Lower => 2,
                },
                t.traveled_distance()
            )?;
        }
        w.flush()
    })();
    result.map_err(io_err(&paths.tracks_meta_path))?;

    let mut w = create(&paths.tracks_path)?;
    let result = (|| -> std::io::Result<()> {
        writeln!(
            w,
            "frame,id,x,y,width,height,xVelocity,yVelocity,xAcceleration,yAcceleration,laneId"
        )?;
        for t in &r.tracks {
            for s in &t.states {
                let (cx, cy, vx, vy, ax, ay) = match t.direction {
                    Direction::Upper => (-s.x, s.y, -s.vx, s.vy, -s.ax, s.ay),
                    Direction::Lower => (s.x, -s.y, s.vx, -s.vy, s.ax, -s.ay),
                };
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    s.frame,
                    t.id.0,
                    cx - t.length / 2.0,
                    cy - t.width / 2.0,
                    t.length,
                    t.width,
                    vx,
                    vy,
                    ax,
                    ay,
                    s.lane_id
                )?;
            }
        }
        w.flush()
    })();
    result.map_err(io_err(&paths.tracks_path))?;
    Ok(paths)
}
