//! Paraverbal features: how a role speaks, computed from its segments and
//! its spoken frames.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Role, Segment};
use crate::timeline::FrameGrid;

#[derive(Debug, Error, PartialEq)]
pub enum ParaverbalError {
    #[error("{0} never speaks")]
    NoSpeech(Role),
    #[error("text is empty")]
    EmptyText,
    #[error("segment [{start}, {end}) has no duration")]
    ZeroDuration { start: f64, end: f64 },
    #[error("{0} speaks but has no frame stream")]
    NoFrameData(Role),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParaverbalFeatures {
    pub session_duration_s: f64,
    pub mean_segment_duration_s: f64,
    pub mean_words_per_segment: f64,
    pub mean_word_length_chars: f64,
    pub mean_speaking_rate_wps: f64,
    /// Statement punctuation per segment; exceeds 1 when segments hold
    /// several sentences.
    pub statement_share: f64,
    pub question_share: f64,
    pub mean_sentiment: f64,
    /// `None` when every spoken frame is unvoiced.
    pub mean_pitch_hz: Option<f64>,
    pub mean_loudness: f64,
}

/// Seconds between the first and the last spoken frame of `role`.
pub fn session_duration(grid: &FrameGrid, role: Role) -> Result<f64, ParaverbalError> {
    let mut spoken = grid.spoken_frames(role);
    let first = spoken.next().ok_or(ParaverbalError::NoSpeech(role))?;
    let last = spoken.last().unwrap_or(first);
    Ok((last - first) as f64 / grid.fps() as f64)
}

/// Number of whitespace runs in the trimmed text, plus one.
pub fn words_in(text: &str) -> Result<usize, ParaverbalError> {
    let n = text.split_whitespace().count();
    if n == 0 {
        Err(ParaverbalError::EmptyText)
    } else {
        Ok(n)
    }
}

const WORD_PUNCTUATION: [char; 6] = ['.', '?', '!', ',', ';', ':'];

/// Mean characters per word, ignoring trailing punctuation.
pub fn word_length(text: &str) -> Result<f64, ParaverbalError> {
    let n = words_in(text)?;
    let chars: usize = text
        .split_whitespace()
        .map(|w| w.trim_end_matches(WORD_PUNCTUATION).chars().count())
        .sum();
    Ok(chars as f64 / n as f64)
}

/// Words per second of a single segment.
pub fn speaking_rate(segment: &Segment) -> Result<f64, ParaverbalError> {
    let dur = segment.duration();
    if dur <= 0.0 {
        return Err(ParaverbalError::ZeroDuration {
            start: segment.start_s,
            end: segment.end_s,
        });
    }
    Ok(words_in(&segment.text)? as f64 / dur)
}

/// Counts sentence punctuation runs in `text` as (statements, questions).
/// A run containing `?` is a question; runs of `.` and `!` are statements.
pub fn punctuation_counts(text: &str) -> (usize, usize) {
    let mut statements = 0;
    let mut questions = 0;
    let mut in_run = false;
    let mut has_question = false;
    for c in text.chars().chain(std::iter::once(' ')) {
        if matches!(c, '.' | '?' | '!') {
            in_run = true;
            has_question |= c == '?';
        } else if in_run {
            if has_question {
                questions += 1;
            } else {
                statements += 1;
            }
            in_run = false;
            has_question = false;
        }
    }
    (statements, questions)
}

/// Statement and question punctuation counts divided by the segment count.
pub fn punctuation_shares<'a>(segments: impl IntoIterator<Item = &'a Segment>) -> (f64, f64) {
    let mut n = 0usize;
    let mut statements = 0usize;
    let mut questions = 0usize;
    for seg in segments {
        let (s, q) = punctuation_counts(&seg.text);
        statements += s;
        questions += q;
        n += 1;
    }
    if n == 0 {
        return (0.0, 0.0);
    }
    (statements as f64 / n as f64, questions as f64 / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskedMeans {
    pub sentiment: f64,
    pub pitch_hz: Option<f64>,
    pub loudness: f64,
}

/// Averages over the spoken frames of `role`: the sentiment of the segment
/// each frame belongs to, voiced pitch, and loudness.
pub fn masked_means(grid: &FrameGrid, role: Role) -> Result<MaskedMeans, ParaverbalError> {
    let segments = grid.segments();
    let mut n = 0usize;
    let mut sentiment = 0.0;
    let mut loudness = 0.0;
    let mut pitch = 0.0;
    let mut voiced = 0usize;
    for i in grid.spoken_frames(role) {
        let seg = grid.spoken_segment(role, i).expect("spoken frame");
        let rec = grid.record(role, i).ok_or(ParaverbalError::NoFrameData(role))?;
        sentiment += segments[seg].sentiment;
        loudness += rec.loudness;
        if rec.pitch_hz > 0.0 {
            pitch += rec.pitch_hz;
            voiced += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Err(ParaverbalError::NoSpeech(role));
    }
    Ok(MaskedMeans {
        sentiment: sentiment / n as f64,
        pitch_hz: (voiced > 0).then(|| pitch / voiced as f64),
        loudness: loudness / n as f64,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// All paraverbal features of `role`. Segment-level quantities are averaged
/// over the role's segments.
pub fn paraverbal_features(grid: &FrameGrid, role: Role) -> Result<ParaverbalFeatures, ParaverbalError> {
    let session_duration_s = session_duration(grid, role)?;
    let masked = masked_means(grid, role)?;
    let segs: Vec<&Segment> = grid.role_segments(role).map(|(_, s)| s).collect();
    let words = segs
        .iter()
        .map(|s| words_in(&s.text).map(|w| w as f64))
        .collect::<Result<Vec<_>, _>>()?;
    let lengths = segs
        .iter()
        .map(|s| word_length(&s.text))
        .collect::<Result<Vec<_>, _>>()?;
    let rates = segs
        .iter()
        .map(|s| speaking_rate(s))
        .collect::<Result<Vec<_>, _>>()?;
    let (statement_share, question_share) = punctuation_shares(segs.iter().copied());
    Ok(ParaverbalFeatures {
        session_duration_s,
        mean_segment_duration_s: mean(segs.iter().map(|s| s.duration())),
        mean_words_per_segment: mean(words.into_iter()),
        mean_word_length_chars: mean(lengths.into_iter()),
        mean_speaking_rate_wps: mean(rates.into_iter()),
        statement_share,
        question_share,
        mean_sentiment: masked.sentiment,
        mean_pitch_hz: masked.pitch_hz,
        mean_loudness: masked.loudness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{FrameRecord, RoleFrames, SessionMeta};
    use crate::timeline::build_grid;
    use proptest::prelude::*;

    fn seg(start: f64, end: f64, text: &str, sentiment: f64) -> Segment {
        Segment {
            start_s: start,
            end_s: end,
            role: Role::Teacher,
            text: text.into(),
            sentiment,
        }
    }

    fn grid_with(segs: &[Segment], n: usize, f: impl Fn(usize) -> FrameRecord) -> FrameGrid {
        let frames = RoleFrames {
            teacher: (0..n).map(f).collect(),
            parent: vec![],
        };
        build_grid(&SessionMeta::new("p", None), segs, &frames).unwrap()
    }

    fn blank(i: usize) -> FrameRecord {
        FrameRecord::blank(i as u64)
    }

    #[test]
    fn session_duration_cases() {
        // frames 0..=1000 spoken
        let g = grid_with(&[seg(0.0, 40.03, "a", 0.0)], 1100, blank);
        assert_eq!(session_duration(&g, Role::Teacher).unwrap(), 40.0);
        let g = grid_with(&[seg(0.0, 0.04, "a", 0.0)], 10, blank);
        assert_eq!(session_duration(&g, Role::Teacher).unwrap(), 0.0);
        assert_eq!(
            session_duration(&g, Role::Parent),
            Err(ParaverbalError::NoSpeech(Role::Parent))
        );
    }

    #[test]
    fn word_counts() {
        assert_eq!(words_in("Guten Tag Frau Müller"), Ok(4));
        assert_eq!(words_in("Hallo"), Ok(1));
        assert_eq!(words_in("a  b"), Ok(2));
        assert_eq!(words_in("  \t "), Err(ParaverbalError::EmptyText));
        // hand tokenizer: count transitions from whitespace to non-whitespace
        for text in ["a  b", " x y\tz ", "ein\n\nzwei  drei"] {
            let mut prev_ws = true;
            let mut runs = 0;
            for c in text.chars() {
                if !c.is_whitespace() && prev_ws {
                    runs += 1;
                }
                prev_ws = c.is_whitespace();
            }
            assert_eq!(words_in(text).unwrap(), runs);
        }
    }

    #[test]
    fn word_lengths() {
        assert_eq!(word_length("Guten Tag"), Ok(4.0));
        assert_eq!(word_length("Ja."), Ok(2.0));
        assert_eq!(word_length("ab cd ef"), Ok(2.0));
        assert_eq!(word_length("Müller?"), Ok(6.0));
    }

    #[test]
    fn speaking_rates() {
        let sixteen = vec!["wort"; 16].join(" ");
        assert_eq!(speaking_rate(&seg(0.0, 8.0, &sixteen, 0.0)), Ok(2.0));
        assert_eq!(speaking_rate(&seg(1.0, 1.5, "Ja", 0.0)), Ok(2.0));
        assert!(matches!(
            speaking_rate(&seg(1.0, 1.0, "Ja", 0.0)),
            Err(ParaverbalError::ZeroDuration { .. })
        ));
    }

    #[test]
    fn shares() {
        let a = [seg(0.0, 1.0, "Das ist gut.", 0.0), seg(1.0, 2.0, "Wirklich?", 0.0)];
        assert_eq!(punctuation_shares(&a), (0.5, 0.5));
        let b = [
            seg(0.0, 1.0, "A. B.", 0.0),
            seg(1.0, 2.0, "C?", 0.0),
            seg(2.0, 3.0, "D.", 0.0),
        ];
        let (s, q) = punctuation_shares(&b);
        assert_eq!(s, 1.0);
        assert!((q - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(punctuation_counts("Echt?! Na gut! Hm..."), (2, 1));
    }

    #[test]
    fn masked_mean_cases() {
        let g = grid_with(
            &[seg(0.0, 1.0, "gut", 1.0), seg(1.0, 2.0, "schlecht", -1.0)],
            60,
            |i| FrameRecord {
                loudness: 1.58,
                ..blank(i)
            },
        );
        let m = masked_means(&g, Role::Teacher).unwrap();
        assert_eq!(m.sentiment, 0.0);
        assert!((m.loudness - 1.58).abs() < 1e-12);
        assert_eq!(m.pitch_hz, None);

        let pitches = [100.0, 0.0, 140.0];
        let g = grid_with(&[seg(0.0, 0.12, "a", 0.0)], 5, |i| FrameRecord {
            pitch_hz: pitches.get(i).copied().unwrap_or(0.0),
            ..blank(i)
        });
        assert_eq!(masked_means(&g, Role::Teacher).unwrap().pitch_hz, Some(120.0));
    }

    #[test]
    fn speaking_without_frames() {
        let frames = RoleFrames {
            teacher: vec![],
            parent: (0..50).map(|i| FrameRecord::blank(i)).collect(),
        };
        let g = build_grid(&SessionMeta::new("p", None), &[seg(0.0, 1.0, "a", 0.0)], &frames).unwrap();
        assert_eq!(masked_means(&g, Role::Teacher), Err(ParaverbalError::NoFrameData(Role::Teacher)));
    }

    fn arb_segments() -> impl Strategy<Value = Vec<(u32, u32, usize, f64, bool)>> {
        // (gap frames, length frames, words, sentiment, question)
        prop::collection::vec((0u32..40, 1u32..100, 1usize..12, -1.0f64..=1.0, prop::bool::ANY), 1..12)
    }

    fn layout(spec: &[(u32, u32, usize, f64, bool)], scale: f64) -> (Vec<Segment>, usize) {
        let mut t = 0u32;
        let mut segs = Vec::new();
        for &(gap, len, words, sentiment, question) in spec {
            t += gap;
            let mut text = vec!["wort"; words].join(" ");
            text.push(if question { '?' } else { '.' });
            segs.push(seg(
                t as f64 * 0.04 * scale,
                (t + len) as f64 * 0.04 * scale,
                &text,
                sentiment,
            ));
            t += len;
        }
        (segs, (t as f64 * scale).ceil() as usize + 2)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sentiment_is_duration_weighted(spec in arb_segments()) {
            let (segs, n) = layout(&spec, 1.0);
            let g = grid_with(&segs, n, blank);
            let m = masked_means(&g, Role::Teacher).unwrap();
            let total: f64 = segs.iter().map(|s| s.duration()).sum();
            let weighted: f64 = segs.iter().map(|s| s.sentiment * s.duration()).sum::<f64>() / total;
            prop_assert!((m.sentiment - weighted).abs() < 1e-9);
        }

        #[test]
        fn time_rescaling(spec in arb_segments(), c in prop::sample::select(vec![2u32, 3, 5])) {
            let (segs, n) = layout(&spec, 1.0);
            let (scaled, n_scaled) = layout(&spec, c as f64);
            let a = paraverbal_features(&grid_with(&segs, n, blank), Role::Teacher).unwrap();
            let b = paraverbal_features(&grid_with(&scaled, n_scaled, blank), Role::Teacher).unwrap();
            let c = c as f64;
            prop_assert!((b.mean_segment_duration_s - c * a.mean_segment_duration_s).abs() < 1e-9);
            prop_assert!((b.mean_speaking_rate_wps - a.mean_speaking_rate_wps / c).abs() < 1e-9);
            // frame quantisation: last-first spoken frame scales to within one frame
            prop_assert!((b.session_duration_s - c * a.session_duration_s).abs() <= c * 0.04 + 1e-9);
            prop_assert_eq!(b.mean_words_per_segment, a.mean_words_per_segment);
            prop_assert_eq!(b.statement_share, a.statement_share);
            prop_assert_eq!(b.question_share, a.question_share);
            prop_assert!((b.mean_sentiment - a.mean_sentiment).abs() < 1e-9);
        }

        #[test]
        fn shares_add_under_concatenation(a in arb_segments(), b in arb_segments()) {
            let (sa, _) = layout(&a, 1.0);
            let (sb, _) = layout(&b, 1.0);
            let (s1, q1) = punctuation_shares(&sa);
            let (s2, q2) = punctuation_shares(&sb);
            let joined: Vec<Segment> = sa.iter().chain(&sb).cloned().collect();
            let (s, q) = punctuation_shares(&joined);
            let (na, nb) = (sa.len() as f64, sb.len() as f64);
            prop_assert!((s * (na + nb) - (s1 * na + s2 * nb)).abs() < 1e-9);
            prop_assert!((q * (na + nb) - (q1 * na + q2 * nb)).abs() < 1e-9);
        }
    }
}
