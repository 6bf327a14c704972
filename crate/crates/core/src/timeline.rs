//! The frame grid that fuses transcript and frame streams, plus the helpers
//! that relate frames to transcript text and audio samples.
//!
//! Frame `i` covers `[i / fps, (i + 1) / fps)`. A frame belongs to a segment
//! when its midpoint lies in the segment's half-open span, so adjacent
//! segments never share a frame.

use std::ops::Range;

use thiserror::Error;

use crate::ingest::{FrameRecord, Role, RoleFrames, Segment, SessionMeta};

/// Length of the audio window aligned to a spoken frame.
pub const AUDIO_WINDOW_S: f64 = 0.200;

const TERMINATORS: [char; 3] = ['.', '?', '!'];
const CLOSERS: [char; 7] = ['"', '\'', '”', '’', '»', ')', ']'];

#[derive(Debug, Error, PartialEq)]
pub enum TimelineError {
    #[error("{role} frames are not contiguous: expected frame {expected}, found {found}")]
    FrameGap { role: Role, expected: u64, found: u64 },
    #[error("frame streams differ in length: teacher {teacher}, parent {parent}")]
    LengthMismatch { teacher: usize, parent: usize },
}

#[derive(Clone, Debug, Default, PartialEq)]
struct RoleTrack {
    frames: Vec<FrameRecord>,
    spoken: Vec<Option<usize>>,
}

/// Per-role frame table with the transcript left-joined onto it.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameGrid {
    fps: u32,
    n_frames: usize,
    segments: Vec<Segment>,
    teacher: RoleTrack,
    parent: RoleTrack,
}

pub fn frame_midpoint(frame: usize, fps: u32) -> f64 {
    (frame as f64 + 0.5) / fps as f64
}

/// Frames of a grid with `n` frames whose midpoint lies in `[start, end)`.
pub fn frames_in_span(start: f64, end: f64, fps: u32, n: usize) -> Range<usize> {
    let fps_f = fps as f64;
    let mid = |i: usize| frame_midpoint(i, fps);
    let guess = |t: f64| {
        let x = (t * fps_f - 0.5).ceil();
        if x.is_nan() || x <= 0.0 {
            0
        } else {
            (x as usize).min(n)
        }
    };
    let mut lo = guess(start);
    while lo > 0 && mid(lo - 1) >= start {
        lo -= 1;
    }
    while lo < n && mid(lo) < start {
        lo += 1;
    }
    let mut hi = guess(end).max(lo);
    while hi > lo && mid(hi - 1) >= end {
        hi -= 1;
    }
    while hi < n && mid(hi) < end {
        hi += 1;
    }
    lo..hi
}

/// Builds the frame grid for one session.
///
/// Each role's frame stream must be empty or contiguous from frame 0, and
/// non-empty streams must have equal length.
pub fn build_grid(
    meta: &SessionMeta,
    segments: &[Segment],
    frames: &RoleFrames,
) -> Result<FrameGrid, TimelineError> {
    for role in Role::ALL {
        for (i, f) in frames.get(role).iter().enumerate() {
            if f.frame_idx != i as u64 {
                return Err(TimelineError::FrameGap {
                    role,
                    expected: i as u64,
                    found: f.frame_idx,
                });
            }
        }
    }
    let (nt, np) = (frames.teacher.len(), frames.parent.len());
    if nt != 0 && np != 0 && nt != np {
        return Err(TimelineError::LengthMismatch {
            teacher: nt,
            parent: np,
        });
    }
    let n_frames = nt.max(np);

    let mut grid = FrameGrid {
        fps: meta.fps,
        n_frames,
        segments: segments.to_vec(),
        teacher: RoleTrack {
            frames: frames.teacher.clone(),
            spoken: vec![None; n_frames],
        },
        parent: RoleTrack {
            frames: frames.parent.clone(),
            spoken: vec![None; n_frames],
        },
    };
    for (j, seg) in segments.iter().enumerate() {
        let span = frames_in_span(seg.start_s, seg.end_s, meta.fps, n_frames);
        let track = grid.track_mut(seg.role);
        for slot in &mut track.spoken[span] {
            // first segment wins where a role's segments overlap
            slot.get_or_insert(j);
        }
    }
    Ok(grid)
}

impl FrameGrid {
    fn track(&self, role: Role) -> &RoleTrack {
        match role {
            Role::Teacher => &self.teacher,
            Role::Parent => &self.parent,
        }
    }

    fn track_mut(&mut self, role: Role) -> &mut RoleTrack {
        match role {
            Role::Teacher => &mut self.teacher,
            Role::Parent => &mut self.parent,
        }
    }

    pub fn fps(&self) -> u32 {
        self.fps
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Indices into [`segments`](Self::segments) spoken by `role`.
    pub fn role_segments(&self, role: Role) -> impl Iterator<Item = (usize, &Segment)> {
        self.segments
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.role == role)
    }

    /// The frame stream of `role`; empty when the role has no frames.
    pub fn frames(&self, role: Role) -> &[FrameRecord] {
        &self.track(role).frames
    }

    pub fn record(&self, role: Role, frame: usize) -> Option<&FrameRecord> {
        self.track(role).frames.get(frame)
    }

    pub fn spoken_segment(&self, role: Role, frame: usize) -> Option<usize> {
        self.track(role).spoken.get(frame).copied().flatten()
    }

    pub fn is_spoken(&self, role: Role, frame: usize) -> bool {
        self.spoken_segment(role, frame).is_some()
    }

    pub fn spoken_frames(&self, role: Role) -> impl Iterator<Item = usize> + '_ {
        self.track(role)
            .spoken
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|_| i))
    }

    pub fn silent_frames(&self, role: Role) -> impl Iterator<Item = usize> + '_ {
        self.track(role)
            .spoken
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.is_none().then_some(i))
    }
}

/// A transcript segment after sentence splitting.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPiece {
    pub segment: Segment,
    /// Index of the input segment this piece came from.
    pub parent: usize,
    /// The text does not end in sentence punctuation, so a sentence may
    /// continue in another segment.
    pub unterminated: bool,
}

fn strip_closers(s: &str) -> &str {
    s.trim_end_matches(|c: char| CLOSERS.contains(&c))
}

fn is_terminated(text: &str) -> bool {
    strip_closers(text.trim()).ends_with(TERMINATORS)
}

/// Splits text after each run of sentence punctuation (optionally followed
/// by closing quotes or brackets) that is followed by whitespace or the end.
pub fn sentences(text: &str) -> Vec<&str> {
    let t = text.trim();
    let chars: Vec<(usize, char)> = t.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut k = 0;
    while k < chars.len() {
        if !TERMINATORS.contains(&chars[k].1) {
            k += 1;
            continue;
        }
        let mut e = k;
        while e + 1 < chars.len() && TERMINATORS.contains(&chars[e + 1].1) {
            e += 1;
        }
        while e + 1 < chars.len() && CLOSERS.contains(&chars[e + 1].1) {
            e += 1;
        }
        if chars.get(e + 1).is_none_or(|(_, c)| c.is_whitespace()) {
            let end = chars[e].0 + chars[e].1.len_utf8();
            let piece = t[start..end].trim();
            if !piece.is_empty() {
                out.push(piece);
            }
            start = end;
        }
        k = e + 1;
    }
    let rest = t[start..].trim();
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

fn letter_weight(s: &str) -> usize {
    s.chars().filter(|c| c.is_alphanumeric()).count()
}

/// Splits multi-sentence segments at sentence boundaries.
///
/// Child spans partition the parent span in proportion to the number of
/// letters and digits in each sentence. Children inherit role and sentiment.
/// Segments holding a single sentence pass through unchanged.
pub fn split_segments(segments: &[Segment]) -> Vec<SplitPiece> {
    let mut out = Vec::with_capacity(segments.len());
    for (parent, seg) in segments.iter().enumerate() {
        let parts = sentences(&seg.text);
        if parts.len() < 2 {
            out.push(SplitPiece {
                segment: seg.clone(),
                parent,
                unterminated: !is_terminated(&seg.text),
            });
            continue;
        }
        // every piece keeps a positive duration, even bare punctuation
        let weights: Vec<usize> = parts.iter().map(|p| letter_weight(p).max(1)).collect();
        let total: usize = weights.iter().sum();
        let share = |k: usize| weights[..k].iter().sum::<usize>() as f64 / total as f64;
        let dur = seg.duration();
        for (k, part) in parts.iter().enumerate() {
            let start_s = if k == 0 {
                seg.start_s
            } else {
                seg.start_s + dur * share(k)
            };
            let end_s = if k + 1 == parts.len() {
                seg.end_s
            } else {
                seg.start_s + dur * share(k + 1)
            };
            out.push(SplitPiece {
                segment: Segment {
                    start_s,
                    end_s,
                    role: seg.role,
                    text: part.to_string(),
                    sentiment: seg.sentiment,
                },
                parent,
                unterminated: !is_terminated(part),
            });
        }
    }
    out
}

/// Audio samples aligned with one frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleWindow {
    pub frame_idx: u64,
    pub start_sample: u64,
    pub end_sample: u64,
}

impl SampleWindow {
    pub fn len(&self) -> u64 {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `round(AUDIO_WINDOW_S * sample_rate)`.
pub fn window_samples(sample_rate: u32) -> u64 {
    (sample_rate as u64 * 2 + 5) / 10
}

/// The 200 ms audio window ending at the end of `frame_idx`, truncated at the
/// start of the stream.
pub fn sample_window(frame_idx: u64, meta: &SessionMeta) -> SampleWindow {
    let num = (frame_idx as u128 + 1) * meta.sample_rate as u128;
    let fps = meta.fps as u128;
    let end_sample = ((2 * num + fps) / (2 * fps)) as u64;
    SampleWindow {
        frame_idx,
        start_sample: end_sample.saturating_sub(window_samples(meta.sample_rate)),
        end_sample,
    }
}
