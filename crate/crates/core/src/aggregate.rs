//! Session-level feature vectors, cohort means and the relative-deviation
//! feedback table.
//!
//! `features.csv` has the header `session_id,rating,` followed by the
//! [`Feature::key`] of all 17 features in canonical order. Values are written
//! at full precision; an unrated session and an all-unvoiced pitch are empty
//! cells.
//!
//! `feedback_<session>.csv` has the header `feature,absolute,relative`, uses
//! the display names, two decimals, and `n/a` where the cohort mean is zero.

use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::ingest::{Role, Segment, SessionBundle};
use crate::nonverbal::{nonverbal_features, NonverbalError, NonverbalFeatures};
use crate::paraverbal::{paraverbal_features, ParaverbalError, ParaverbalFeatures};
use crate::timeline::{build_grid, split_segments, TimelineError};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    Paraverbal(#[from] ParaverbalError),
    #[error(transparent)]
    Nonverbal(#[from] NonverbalError),
    #[error("need at least 2 sessions, got {0}")]
    TooFewSessions(usize),
    #[error("features table: {0}")]
    Csv(#[from] csv::Error),
    #[error("features table line {line}: {reason}")]
    Table { line: u64, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    SessionDuration,
    SegmentDuration,
    WordsPerSegment,
    WordLength,
    SpeakingRate,
    Statement,
    Question,
    Sentiment,
    Pitch,
    Loudness,
    Gaze,
    MutualGaze,
    Smile,
    MutualSmile,
    Happiness,
    Sadness,
    Anger,
}

impl Feature {
    pub const ALL: [Feature; 17] = [
        Feature::SessionDuration,
        Feature::SegmentDuration,
        Feature::WordsPerSegment,
        Feature::WordLength,
        Feature::SpeakingRate,
        Feature::Statement,
        Feature::Question,
        Feature::Sentiment,
        Feature::Pitch,
        Feature::Loudness,
        Feature::Gaze,
        Feature::MutualGaze,
        Feature::Smile,
        Feature::MutualSmile,
        Feature::Happiness,
        Feature::Sadness,
        Feature::Anger,
    ];

    pub fn paraverbal() -> &'static [Feature] {
        &Self::ALL[..10]
    }

    pub fn nonverbal() -> &'static [Feature] {
        &Self::ALL[10..]
    }

    pub fn is_paraverbal(self) -> bool {
        (self as usize) < 10
    }

    /// Column key in `features.csv`.
    pub fn key(self) -> &'static str {
        match self {
            Feature::SessionDuration => "session_duration",
            Feature::SegmentDuration => "segment_duration",
            Feature::WordsPerSegment => "words_per_segment",
            Feature::WordLength => "word_length",
            Feature::SpeakingRate => "speaking_rate",
            Feature::Statement => "statement",
            Feature::Question => "question",
            Feature::Sentiment => "sentiment",
            Feature::Pitch => "pitch",
            Feature::Loudness => "loudness",
            Feature::Gaze => "gaze",
            Feature::MutualGaze => "mutual_gaze",
            Feature::Smile => "smile",
            Feature::MutualSmile => "mutual_smile",
            Feature::Happiness => "happiness",
            Feature::Sadness => "sadness",
            Feature::Anger => "anger",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Feature::SessionDuration => "Session Duration",
            Feature::SegmentDuration => "Segment Duration",
            Feature::WordsPerSegment => "Words per Segment",
            Feature::WordLength => "Word length",
            Feature::SpeakingRate => "Speaking Rate",
            Feature::Statement => "Statement",
            Feature::Question => "Question",
            Feature::Sentiment => "Sentiment",
            Feature::Pitch => "Pitch",
            Feature::Loudness => "Loudness",
            Feature::Gaze => "Gaze",
            Feature::MutualGaze => "Mutual Gaze",
            Feature::Smile => "Smile",
            Feature::MutualSmile => "Mutual Smile",
            Feature::Happiness => "Happiness",
            Feature::Sadness => "Sadness",
            Feature::Anger => "Anger",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.key() == s || f.display_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown feature {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionFeatures {
    pub session_id: String,
    pub rating: Option<u8>,
    /// Indexed by `Feature as usize`; only pitch may be absent.
    pub values: [Option<f64>; 17],
}

impl SessionFeatures {
    pub fn from_parts(
        session_id: impl Into<String>,
        rating: Option<u8>,
        p: &ParaverbalFeatures,
        n: &NonverbalFeatures,
    ) -> Self {
        let values = [
            Some(p.session_duration_s),
            Some(p.mean_segment_duration_s),
            Some(p.mean_words_per_segment),
            Some(p.mean_word_length_chars),
            Some(p.mean_speaking_rate_wps),
            Some(p.statement_share),
            Some(p.question_share),
            Some(p.mean_sentiment),
            p.mean_pitch_hz,
            Some(p.mean_loudness),
            Some(n.gaze_share),
            Some(n.mutual_gaze_share),
            Some(n.smile_share),
            Some(n.mutual_smile_share),
            Some(n.happy_share),
            Some(n.sad_share),
            Some(n.anger_share),
        ];
        SessionFeatures {
            session_id: session_id.into(),
            rating,
            values,
        }
    }

    /// A session with every feature present; handy for fixtures.
    pub fn from_values(session_id: impl Into<String>, rating: Option<u8>, values: [f64; 17]) -> Self {
        SessionFeatures {
            session_id: session_id.into(),
            rating,
            values: values.map(Some),
        }
    }

    pub fn get(&self, feature: Feature) -> Option<f64> {
        self.values[feature as usize]
    }

    pub fn set(&mut self, feature: Feature, value: Option<f64>) {
        self.values[feature as usize] = value;
    }
}

/// Teacher features of one session. With `split_segments` the transcript is
/// split into sentences first.
pub fn assemble(bundle: &SessionBundle, cfg: &RunConfig) -> Result<SessionFeatures, AggregateError> {
    let segments: Vec<Segment> = if cfg.split_segments {
        split_segments(&bundle.segments).into_iter().map(|p| p.segment).collect()
    } else {
        bundle.segments.clone()
    };
    let grid = build_grid(&bundle.meta, &segments, &bundle.frames)?;
    let para = paraverbal_features(&grid, Role::Teacher)?;
    let non = nonverbal_features(&grid, &cfg.gaze, cfg.smile_threshold)?;
    Ok(SessionFeatures::from_parts(
        bundle.meta.session_id.clone(),
        bundle.meta.rating,
        &para,
        &non,
    ))
}

/// Deviation in multiples of the mean; `None` when the mean is zero.
pub fn relative_deviation(absolute: f64, mean: f64) -> Option<f64> {
    if mean == 0.0 || !mean.is_finite() {
        return None;
    }
    if absolute == mean {
        return Some(0.0);
    }
    Some(absolute / mean - 1.0)
}

/// Mean of every feature over the sessions where it is present.
pub fn cohort_means<'a>(sessions: impl IntoIterator<Item = &'a SessionFeatures>) -> [Option<f64>; 17] {
    let mut sums = [0.0; 17];
    let mut counts = [0usize; 17];
    for s in sessions {
        for (i, v) in s.values.iter().enumerate() {
            if let Some(v) = v {
                sums[i] += v;
                counts[i] += 1;
            }
        }
    }
    std::array::from_fn(|i| (counts[i] > 0).then(|| sums[i] / counts[i] as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeedbackRow {
    pub feature: Feature,
    pub absolute: Option<f64>,
    pub relative: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionFeedback {
    pub session_id: String,
    pub rows: Vec<FeedbackRow>,
}

/// One feedback table per session, ordered by session id, each comparing
/// the session with the mean over all given sessions.
pub fn feedback_table(all: &[SessionFeatures]) -> Result<Vec<SessionFeedback>, AggregateError> {
    if all.len() < 2 {
        return Err(AggregateError::TooFewSessions(all.len()));
    }
    let means = cohort_means(all);
    let mut sorted: Vec<&SessionFeatures> = all.iter().collect();
    sorted.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    Ok(sorted
        .into_iter()
        .map(|s| SessionFeedback {
            session_id: s.session_id.clone(),
            rows: Feature::ALL
                .into_iter()
                .map(|f| {
                    let absolute = s.get(f);
                    let relative = absolute.zip(means[f as usize]).and_then(|(a, m)| relative_deviation(a, m));
                    FeedbackRow {
                        feature: f,
                        absolute,
                        relative,
                    }
                })
                .collect(),
        })
        .collect())
}

/// Two decimals, `n/a` for missing values, and no negative zero.
pub fn format_2dp(value: Option<f64>) -> String {
    match value {
        None => "n/a".into(),
        Some(v) => {
            let s = format!("{v:.2}");
            if s == "-0.00" {
                "0.00".into()
            } else {
                s
            }
        }
    }
}

pub fn write_feedback_csv<W: io::Write>(out: W, feedback: &SessionFeedback) -> Result<(), AggregateError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "absolute", "relative"])?;
    for row in &feedback.rows {
        w.write_record([
            row.feature.display_name().to_string(),
            format_2dp(row.absolute),
            format_2dp(row.relative),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn features_header() -> Vec<&'static str> {
    let mut h = vec!["session_id", "rating"];
    h.extend(Feature::ALL.iter().map(|f| f.key()));
    h
}

/// Writes `features.csv` rows in the given order.
pub fn write_features_csv<W: io::Write>(out: W, sessions: &[SessionFeatures]) -> Result<(), AggregateError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(features_header())?;
    for s in sessions {
        let mut rec = vec![s.session_id.clone(), s.rating.map(|r| r.to_string()).unwrap_or_default()];
        rec.extend(s.values.iter().map(|v| v.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv<R: io::Read>(input: R) -> Result<Vec<SessionFeatures>, AggregateError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != features_header() {
        return Err(AggregateError::Table {
            line: 1,
            reason: format!("unexpected header {}", header.join(",")),
        });
    }
    let mut out: Vec<SessionFeatures> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |reason: String| AggregateError::Table { line, reason };
        let session_id = rec[0].to_string();
        if session_id.is_empty() {
            return Err(err("empty session_id".into()));
        }
        if out.iter().any(|s| s.session_id == session_id) {
            return Err(err(format!("duplicate session {session_id}")));
        }
        let rating = match &rec[1] {
            "" => None,
            v => Some(
                v.parse::<u8>()
                    .ok()
                    .filter(|r| (1..=5).contains(r))
                    .ok_or_else(|| err(format!("rating {v:?} is not in 1..5")))?,
            ),
        };
        let mut values = [None; 17];
        for (i, f) in Feature::ALL.into_iter().enumerate() {
            let cell = &rec[i + 2];
            values[i] = match cell {
                "" if f == Feature::Pitch => None,
                "" => return Err(err(format!("{} is empty", f.key()))),
                v => Some(
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| err(format!("{} value {v:?} is not a number", f.key())))?,
                ),
            };
        }
        out.push(SessionFeatures {
            session_id,
            rating,
            values,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn session(id: &str, v: f64) -> SessionFeatures {
        SessionFeatures::from_values(id, Some(3), [v; 17])
    }

    #[test]
    fn relative_examples() {
        let r = relative_deviation(693.96, 564.20).unwrap();
        assert!((r - 0.23).abs() < 0.005);
        assert_eq!(relative_deviation(564.2, 564.2), Some(0.0));
        assert_eq!(relative_deviation(0.0, 564.2), Some(-1.0));
        assert_eq!(relative_deviation(1.0, 0.0), None);
    }

    #[test]
    fn two_session_table() {
        let t = feedback_table(&[session("b", 4.0), session("a", 2.0)]).unwrap();
        assert_eq!(t[0].session_id, "a");
        let ra = t[0].rows[0].relative.unwrap();
        let rb = t[1].rows[0].relative.unwrap();
        assert!((ra + 1.0 / 3.0).abs() < 1e-12 && (rb - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            feedback_table(&[session("a", 1.0)]),
            Err(AggregateError::TooFewSessions(1))
        ));
    }

    #[test]
    fn implied_anger_mean() {
        // absolute 0.04 at relative 9.45 implies a cohort mean of 0.04 / 10.45
        let mean: f64 = 0.04 / (9.45 + 1.0);
        assert!((mean - 0.00383).abs() < 5e-6);
        assert!((relative_deviation(0.04, mean).unwrap() - 9.45).abs() < 1e-12);
    }

    #[test]
    fn identical_cohort_and_zero_mean() {
        let mut a = session("a", 1.5);
        let mut b = session("b", 1.5);
        a.set(Feature::Anger, Some(0.0));
        b.set(Feature::Anger, Some(0.0));
        b.set(Feature::Pitch, None);
        let t = feedback_table(&[a, b]).unwrap();
        for s in &t {
            for row in &s.rows {
                match row.feature {
                    Feature::Anger => assert_eq!(row.relative, None),
                    Feature::Pitch if s.session_id == "b" => assert_eq!(row.relative, None),
                    _ => assert_eq!(row.relative, Some(0.0)),
                }
            }
        }
        let mut out = Vec::new();
        write_feedback_csv(&mut out, &t[1]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("feature,absolute,relative\nSession Duration,1.50,0.00\n"));
        assert!(text.contains("Pitch,n/a,n/a\n"));
        assert!(text.contains("Anger,0.00,n/a\n"));
    }

    #[test]
    fn negative_zero_is_normalized() {
        assert_eq!(format_2dp(Some(-0.001)), "0.00");
        assert_eq!(format_2dp(Some(-0.005001)), "-0.01");
        assert_eq!(format_2dp(None), "n/a");
    }

    #[test]
    fn features_csv_round_trip() {
        let mut a = SessionFeatures::from_values("s1", None, std::array::from_fn(|i| i as f64 / 3.0));
        a.set(Feature::Pitch, None);
        let b = SessionFeatures::from_values("s2", Some(5), [0.1 + 0.2; 17]);
        let mut out = Vec::new();
        write_features_csv(&mut out, &[a.clone(), b.clone()]).unwrap();
        let back = read_features_csv(out.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn features_csv_rejects_bad_rows() {
        let header = features_header().join(",");
        let row = |cells: &str| format!("{header}\n{cells}\n");
        let zeros = vec!["0"; 17].join(",");
        assert!(read_features_csv(row(&format!("a,9,{zeros}")).as_bytes()).is_err());
        let mut cells = vec!["0"; 17];
        cells[0] = "";
        assert!(read_features_csv(row(&format!("a,3,{}", cells.join(","))).as_bytes()).is_err());
        assert!(read_features_csv(format!("x,y\n").as_bytes()).is_err());
        assert!(read_features_csv(row(&format!("a,,{zeros}")).as_bytes()).is_ok());
    }

    #[test]
    fn feature_names() {
        assert_eq!(Feature::paraverbal().len(), 10);
        assert_eq!(Feature::nonverbal()[0], Feature::Gaze);
        assert_eq!("Mutual Gaze".parse::<Feature>(), Ok(Feature::MutualGaze));
        assert_eq!("word_length".parse::<Feature>(), Ok(Feature::WordLength));
        assert_eq!(serde_json::to_string(&Feature::MutualSmile).unwrap(), "\"mutual_smile\"");
    }

    fn cohort() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0.01f64..1000.0, 17), 2..12)
    }

    fn build(rows: &[Vec<f64>]) -> Vec<SessionFeatures> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| SessionFeatures::from_values(format!("s{i:02}"), None, std::array::from_fn(|j| r[j])))
            .collect()
    }

    proptest! {
        #[test]
        fn mean_consistency(rows in cohort()) {
            let sessions = build(&rows);
            let t = feedback_table(&sessions).unwrap();
            let means = cohort_means(&sessions);
            for f in Feature::ALL {
                let m = means[f as usize].unwrap();
                let lhs: f64 = t.iter().map(|s| (s.rows[f as usize].relative.unwrap() + 1.0) * m).sum();
                let rhs: f64 = sessions.iter().map(|s| s.get(f).unwrap()).sum();
                prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
            }
        }

        #[test]
        fn scale_invariant(rows in cohort(), c in 0.01f64..100.0) {
            let sessions = build(&rows);
            let scaled: Vec<SessionFeatures> = sessions
                .iter()
                .map(|s| SessionFeatures { values: s.values.map(|v| v.map(|v| v * c)), ..s.clone() })
                .collect();
            let (a, b) = (feedback_table(&sessions).unwrap(), feedback_table(&scaled).unwrap());
            for (x, y) in a.iter().zip(&b) {
                for (rx, ry) in x.rows.iter().zip(&y.rows) {
                    let (u, v) = (rx.relative.unwrap(), ry.relative.unwrap());
                    prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
                }
            }
        }

        #[test]
        fn permutation_invariant(rows in cohort(), seed in any::<u64>()) {
            let sessions = build(&rows);
            let mut shuffled = sessions.clone();
            let n = shuffled.len();
            shuffled.rotate_left((seed as usize) % n);
            shuffled.swap(0, n - 1);
            let (a, b) = (feedback_table(&sessions).unwrap(), feedback_table(&shuffled).unwrap());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(&x.session_id, &y.session_id);
                for (rx, ry) in x.rows.iter().zip(&y.rows) {
                    let (u, v) = (rx.relative.unwrap(), ry.relative.unwrap());
                    prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
                }
            }
        }
    }
}
