//! Loading and validating the per-session corpus layout.
//!
//! A corpus is a directory with one subdirectory per session:
//!
//! ```text
//! <session>/
//!   session.json                         {"session_id", "rating", "fps", "sample_rate"}
//!   transcript.jsonl                     one segment per line
//!   frames_teacher.csv, frames_parent.csv
//!   annotations_<kind>_<annotator>.csv   optional, kind = phases | techniques
//! ```
//!
//! Row numbers in [`IngestError::SchemaViolation`] are 1-based line numbers of
//! the offending file (the CSV header is line 1).

mod vocab;
mod writer;

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub use vocab::{Label, TierKind};
pub use writer::write_session;

pub const DEFAULT_FPS: u32 = 25;
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

pub const SESSION_FILE: &str = "session.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const FRAME_HEADER: [&str; 11] = [
    "frame_idx",
    "gaze_x",
    "gaze_y",
    "smile_p",
    "happy_p",
    "sad_p",
    "anger_p",
    "other_p",
    "pitch_hz",
    "loudness",
    "face_detected",
];
pub const ANNOTATION_HEADER: [&str; 3] = ["start_s", "end_s", "label"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: row {row}, column `{column}`: {reason}")]
    SchemaViolation {
        file: String,
        row: usize,
        column: String,
        reason: String,
    },
    #[error("{file}: {reason}")]
    InvariantViolation { file: String, reason: String },
    #[error("{file}: span [{start}, {end}) overlaps a span ending at {previous_end}")]
    OverlappingAnnotation {
        file: String,
        start: f64,
        end: f64,
        previous_end: f64,
    },
    #[error("no session directories under {}", .0.display())]
    EmptyCorpus(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Teacher,
    Parent,
}

impl Role {
    pub const ALL: [Role; 2] = [Role::Teacher, Role::Parent];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Teacher => "teacher",
            Role::Parent => "parent",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "teacher" => Some(Role::Teacher),
            "parent" => Some(Role::Parent),
            _ => None,
        }
    }

    pub fn other(self) -> Role {
        match self {
            Role::Teacher => Role::Parent,
            Role::Parent => Role::Teacher,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    /// Expert rating on a five-point Likert scale, absent for unrated sessions.
    pub rating: Option<u8>,
    pub fps: u32,
    pub sample_rate: u32,
}

impl SessionMeta {
    pub fn new(session_id: impl Into<String>, rating: Option<u8>) -> Self {
        SessionMeta {
            session_id: session_id.into(),
            rating,
            fps: DEFAULT_FPS,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

/// One transcribed utterance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
    pub role: Role,
    pub text: String,
    /// Positive-minus-negative sentiment score in [-1, 1].
    pub sentiment: f64,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Canonical order: start time, then role, then end time and text.
    pub fn canonical_cmp(&self, other: &Segment) -> Ordering {
        self.start_s
            .total_cmp(&other.start_s)
            .then(self.role.cmp(&other.role))
            .then(self.end_s.total_cmp(&other.end_s))
            .then_with(|| self.text.cmp(&other.text))
    }
}

/// Per-frame signals of one participant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_idx: u64,
    pub gaze_x: f64,
    pub gaze_y: f64,
    pub smile_p: f64,
    pub happy_p: f64,
    pub sad_p: f64,
    pub anger_p: f64,
    pub other_p: f64,
    /// 0 marks an unvoiced frame.
    pub pitch_hz: f64,
    pub loudness: f64,
    pub face_detected: bool,
}

impl FrameRecord {
    /// An undetected, silent frame.
    pub fn blank(frame_idx: u64) -> Self {
        FrameRecord {
            frame_idx,
            gaze_x: 0.0,
            gaze_y: 0.0,
            smile_p: 0.0,
            happy_p: 0.0,
            sad_p: 0.0,
            anger_p: 0.0,
            other_p: 1.0,
            pitch_hz: 0.0,
            loudness: 0.0,
            face_detected: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoleFrames {
    pub teacher: Vec<FrameRecord>,
    pub parent: Vec<FrameRecord>,
}

impl RoleFrames {
    pub fn get(&self, role: Role) -> &[FrameRecord] {
        match role {
            Role::Teacher => &self.teacher,
            Role::Parent => &self.parent,
        }
    }

    pub fn get_mut(&mut self, role: Role) -> &mut Vec<FrameRecord> {
        match role {
            Role::Teacher => &mut self.teacher,
            Role::Parent => &mut self.parent,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationSpan {
    pub start_s: f64,
    pub end_s: f64,
    pub label: Label,
}

/// Time-stamped labels from one annotator. Spans are sorted and disjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationTier {
    pub annotator_id: String,
    pub kind: TierKind,
    pub spans: Vec<AnnotationSpan>,
}

impl AnnotationTier {
    pub fn end_s(&self) -> f64 {
        self.spans.iter().map(|s| s.end_s).fold(0.0, f64::max)
    }

    pub fn file_name(&self) -> String {
        format!("annotations_{}_{}.csv", self.kind, self.annotator_id)
    }
}

/// Everything loaded from one session directory.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionBundle {
    pub meta: SessionMeta,
    pub segments: Vec<Segment>,
    pub frames: RoleFrames,
    pub tiers: Vec<AnnotationTier>,
}

impl SessionBundle {
    /// Puts segments and tiers into canonical order.
    pub fn canonicalize(&mut self) {
        self.segments.sort_by(Segment::canonical_cmp);
        self.tiers
            .sort_by(|a, b| (a.kind, &a.annotator_id).cmp(&(b.kind, &b.annotator_id)));
        for tier in &mut self.tiers {
            tier.spans.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        }
    }
}

/// Fallback values for `session.json` fields that may be omitted.
#[derive(Clone, Copy, Debug)]
pub struct LoadDefaults {
    pub fps: u32,
    pub sample_rate: u32,
}

impl Default for LoadDefaults {
    fn default() -> Self {
        LoadDefaults {
            fps: DEFAULT_FPS,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

pub fn load_session(dir: &Path) -> Result<SessionBundle, IngestError> {
    load_session_with(dir, LoadDefaults::default())
}

pub fn load_session_with(dir: &Path, defaults: LoadDefaults) -> Result<SessionBundle, IngestError> {
    let meta = parse_meta(&read_required(dir, SESSION_FILE)?, defaults)?;
    let segments = parse_transcript(&read_required(dir, TRANSCRIPT_FILE)?)?;
    let mut frames = RoleFrames::default();
    for role in Role::ALL {
        let name = frames_file_name(role);
        *frames.get_mut(role) = parse_frames(&name, &read_required(dir, &name)?)?;
    }

    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| IngestError::Io {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    let mut tiers = Vec::new();
    for path in entries {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(stem) = name
            .strip_prefix("annotations_")
            .and_then(|s| s.strip_suffix(".csv"))
        else {
            continue;
        };
        let (kind, annotator) = stem.split_once('_').ok_or_else(|| IngestError::InvariantViolation {
            file: name.to_string(),
            reason: "expected annotations_<kind>_<annotator>.csv".into(),
        })?;
        let kind = TierKind::parse(kind).ok_or_else(|| IngestError::InvariantViolation {
            file: name.to_string(),
            reason: format!("unknown annotation kind `{kind}`"),
        })?;
        if annotator.is_empty() {
            return Err(IngestError::InvariantViolation {
                file: name.to_string(),
                reason: "empty annotator id".into(),
            });
        }
        let text = read_file(&path)?;
        let spans = parse_annotations(name, kind, &text)?;
        tiers.push(AnnotationTier {
            annotator_id: annotator.to_string(),
            kind,
            spans,
        });
    }

    let mut bundle = SessionBundle {
        meta,
        segments,
        frames,
        tiers,
    };
    bundle.canonicalize();
    Ok(bundle)
}

pub fn frames_file_name(role: Role) -> String {
    format!("frames_{role}.csv")
}

fn read_file(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_required(dir: &Path, name: &str) -> Result<String, IngestError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(IngestError::MissingFile(path));
    }
    read_file(&path)
}

fn schema(file: &str, row: usize, column: &str, reason: impl Into<String>) -> IngestError {
    IngestError::SchemaViolation {
        file: file.to_string(),
        row,
        column: column.to_string(),
        reason: reason.into(),
    }
}

fn parse_meta(text: &str, defaults: LoadDefaults) -> Result<SessionMeta, IngestError> {
    let file = SESSION_FILE;
    let value: Value =
        serde_json::from_str(text).map_err(|e| schema(file, e.line(), "", e.to_string()))?;
    let Value::Object(map) = value else {
        return Err(schema(file, 1, "", "expected a JSON object"));
    };
    for key in map.keys() {
        if !["session_id", "rating", "fps", "sample_rate"].contains(&key.as_str()) {
            return Err(schema(file, 1, key, "unknown key"));
        }
    }
    let session_id = match map.get("session_id") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
        Some(Value::String(_)) => return Err(schema(file, 1, "session_id", "empty")),
        Some(_) => return Err(schema(file, 1, "session_id", "expected a string")),
        None => return Err(schema(file, 1, "session_id", "missing")),
    };
    if session_id.contains(['/', '\\']) {
        return Err(schema(file, 1, "session_id", "must not contain path separators"));
    }
    let int_field = |key: &str| -> Result<Option<i64>, IngestError> {
        match map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_i64()
                .map(Some)
                .ok_or_else(|| schema(file, 1, key, "expected an integer")),
        }
    };
    let invariant = |reason: String| IngestError::InvariantViolation {
        file: file.to_string(),
        reason,
    };
    let rating = match int_field("rating")? {
        None => None,
        Some(r @ 1..=5) => Some(r as u8),
        Some(r) => return Err(invariant(format!("rating {r} outside Likert range 1..=5"))),
    };
    let positive = |key: &str, fallback: u32| -> Result<u32, IngestError> {
        match int_field(key)? {
            None => Ok(fallback),
            Some(v) if v > 0 && v <= u32::MAX as i64 => Ok(v as u32),
            Some(v) => Err(invariant(format!("{key} must be positive, got {v}"))),
        }
    };
    Ok(SessionMeta {
        session_id,
        rating,
        fps: positive("fps", defaults.fps)?,
        sample_rate: positive("sample_rate", defaults.sample_rate)?,
    })
}

fn json_number(file: &str, row: usize, map: &Map<String, Value>, key: &str) -> Result<f64, IngestError> {
    match map.get(key) {
        None => Err(schema(file, row, key, "missing")),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| schema(file, row, key, "expected a finite number")),
    }
}

fn parse_transcript(text: &str) -> Result<Vec<Segment>, IngestError> {
    let file = TRANSCRIPT_FILE;
    let mut segments = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(line).map_err(|e| schema(file, row, "", e.to_string()))?;
        let Value::Object(map) = value else {
            return Err(schema(file, row, "", "expected a JSON object"));
        };
        for key in map.keys() {
            if !["start_s", "end_s", "role", "text", "sentiment"].contains(&key.as_str()) {
                return Err(schema(file, row, key, "unknown key"));
            }
        }
        let start_s = json_number(file, row, &map, "start_s")?;
        let end_s = json_number(file, row, &map, "end_s")?;
        if start_s < 0.0 {
            return Err(schema(file, row, "start_s", "negative start time"));
        }
        if start_s >= end_s {
            return Err(schema(
                file,
                row,
                "end_s",
                format!("end {end_s} is not after start {start_s}"),
            ));
        }
        let role = match map.get("role") {
            Some(Value::String(s)) => {
                Role::parse(s).ok_or_else(|| schema(file, row, "role", format!("unknown role `{s}`")))?
            }
            Some(_) => return Err(schema(file, row, "role", "expected a string")),
            None => return Err(schema(file, row, "role", "missing")),
        };
        let text = match map.get("text") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            Some(Value::String(_)) => return Err(schema(file, row, "text", "empty after trimming")),
            Some(_) => return Err(schema(file, row, "text", "expected a string")),
            None => return Err(schema(file, row, "text", "missing")),
        };
        let sentiment = json_number(file, row, &map, "sentiment")?;
        if !(-1.0..=1.0).contains(&sentiment) {
            return Err(schema(file, row, "sentiment", format!("{sentiment} outside [-1, 1]")));
        }
        segments.push(Segment {
            start_s,
            end_s,
            role,
            text,
            sentiment,
        });
    }
    Ok(segments)
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes())
}

fn check_header(file: &str, rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<(), IngestError> {
    let header = rdr
        .headers()
        .map_err(|e| schema(file, 1, "", e.to_string()))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(schema(
            file,
            1,
            "",
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    Ok(())
}

fn csv_row_error(file: &str, e: csv::Error) -> IngestError {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    schema(file, row, "", e.to_string())
}

fn parse_f64(file: &str, row: usize, column: &str, field: &str) -> Result<f64, IngestError> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| schema(file, row, column, format!("`{field}` is not a finite number")))
}

fn parse_frames(file: &str, text: &str) -> Result<Vec<FrameRecord>, IngestError> {
    let mut rdr = csv_reader(text);
    check_header(file, &mut rdr, &FRAME_HEADER)?;
    let mut out: Vec<FrameRecord> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_row_error(file, e))?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let frame_idx: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| schema(file, row, "frame_idx", format!("`{}` is not a frame index", &record[0])))?;
        if let Some(prev) = out.last() {
            if frame_idx <= prev.frame_idx {
                return Err(schema(
                    file,
                    row,
                    "frame_idx",
                    format!("{frame_idx} does not increase past {}", prev.frame_idx),
                ));
            }
        }
        let mut values = [0.0f64; 9];
        for (k, value) in values.iter_mut().enumerate() {
            *value = parse_f64(file, row, FRAME_HEADER[k + 1], &record[k + 1])?;
        }
        for (k, value) in values.iter().enumerate().take(7).skip(2) {
            if !(0.0..=1.0).contains(value) {
                return Err(schema(file, row, FRAME_HEADER[k + 1], format!("probability {value} outside [0, 1]")));
            }
        }
        if values[7] < 0.0 {
            return Err(schema(file, row, "pitch_hz", "negative pitch"));
        }
        if values[8] < 0.0 {
            return Err(schema(file, row, "loudness", "negative loudness"));
        }
        let face_detected = match record[10].trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(schema(file, row, "face_detected", format!("`{other}` is not a boolean"))),
        };
        out.push(FrameRecord {
            frame_idx,
            gaze_x: values[0],
            gaze_y: values[1],
            smile_p: values[2],
            happy_p: values[3],
            sad_p: values[4],
            anger_p: values[5],
            other_p: values[6],
            pitch_hz: values[7],
            loudness: values[8],
            face_detected,
        });
    }
    Ok(out)
}

fn parse_annotations(file: &str, kind: TierKind, text: &str) -> Result<Vec<AnnotationSpan>, IngestError> {
    let mut rdr = csv_reader(text);
    check_header(file, &mut rdr, &ANNOTATION_HEADER)?;
    let mut spans = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_row_error(file, e))?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let start_s = parse_f64(file, row, "start_s", &record[0])?;
        let end_s = parse_f64(file, row, "end_s", &record[1])?;
        if start_s < 0.0 || start_s >= end_s {
            return Err(schema(file, row, "end_s", format!("invalid span [{start_s}, {end_s})")));
        }
        let label = Label::parse(kind, record[2].trim()).ok_or_else(|| {
            schema(file, row, "label", format!("`{}` is not a {kind} label", &record[2]))
        })?;
        spans.push(AnnotationSpan { start_s, end_s, label });
    }
    spans.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for pair in spans.windows(2) {
        if pair[1].start_s < pair[0].end_s {
            return Err(IngestError::OverlappingAnnotation {
                file: file.to_string(),
                start: pair[1].start_s,
                end: pair[1].end_s,
                previous_end: pair[0].end_s,
            });
        }
    }
    Ok(spans)
}

/// Session directories under `root`, sorted by name.
pub fn session_dirs(root: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let rd = fs::read_dir(root).map_err(|source| IngestError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    let mut dirs: Vec<PathBuf> = rd
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(IngestError::EmptyCorpus(root.to_path_buf()));
    }
    Ok(dirs)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum SessionStatus {
    Pass { session_id: String, warnings: Vec<String> },
    Fail { reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SessionCheck {
    pub dir: PathBuf,
    #[serde(flatten)]
    pub status: SessionStatus,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CorpusReport {
    pub sessions: Vec<SessionCheck>,
}

impl CorpusReport {
    pub fn passed(&self) -> usize {
        self.sessions
            .iter()
            .filter(|s| matches!(s.status, SessionStatus::Pass { .. }))
            .count()
    }

    pub fn failed(&self) -> usize {
        self.sessions.len() - self.passed()
    }
}

pub fn check_outcome(dir: &Path, outcome: &Result<SessionBundle, IngestError>) -> SessionCheck {
    let status = match outcome {
        Ok(bundle) => {
            let mut warnings = Vec::new();
            if bundle.meta.rating.is_none() {
                warnings.push("unrated".to_string());
            }
            SessionStatus::Pass {
                session_id: bundle.meta.session_id.clone(),
                warnings,
            }
        }
        Err(e) => SessionStatus::Fail {
            reason: e.to_string(),
        },
    };
    SessionCheck {
        dir: dir.to_path_buf(),
        status,
    }
}

/// Loads every session under `root`, collecting failures instead of stopping
/// at the first one.
pub fn validate_corpus(root: &Path) -> Result<CorpusReport, IngestError> {
    validate_corpus_with(root, LoadDefaults::default())
}

pub fn validate_corpus_with(root: &Path, defaults: LoadDefaults) -> Result<CorpusReport, IngestError> {
    let sessions = session_dirs(root)?
        .iter()
        .map(|dir| check_outcome(dir, &load_session_with(dir, defaults)))
        .collect();
    Ok(CorpusReport { sessions })
}
