//! Nonverbal features, computed over every frame of the session: gaze in
//! the main direction, smiling, their mutual variants, and categorical
//! emotions.
//!
//! Frames without a detected face are left out of every share. Mutual shares
//! are taken over the frames where at least one participant's face was
//! detected, which keeps them bounded by the individual shares.

pub mod linkage;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{FrameRecord, Role};
use crate::timeline::FrameGrid;
pub use linkage::{Linkage, LinkageError};

#[derive(Debug, Error, PartialEq)]
pub enum NonverbalError {
    #[error("gaze clustering needs at least two face-detected frames, got {0}")]
    TooFewFrames(usize),
    #[error("no frame has a detected face")]
    NoFaceFrames,
    #[error("frame streams differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("smile threshold {0} must lie in (0, 1)")]
    InvalidThreshold(f64),
    #[error("cluster count must be at least 2, got {0}")]
    InvalidClusterCount(usize),
    #[error(transparent)]
    Linkage(#[from] LinkageError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GazeParams {
    pub linkage: Linkage,
    /// Number of clusters cut from the dendrogram; all but the largest form
    /// the "other" direction.
    pub k: usize,
    /// Cluster a stride subsample of at most this many frames and assign the
    /// remaining frames to the nearest cluster centroid.
    pub max_points: Option<usize>,
}

impl Default for GazeParams {
    fn default() -> Self {
        GazeParams {
            linkage: Linkage::Ward,
            k: 2,
            max_points: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GazeLabel {
    Main,
    Other,
    NoFace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GazeClustering {
    /// One label per frame of the input stream.
    pub assignments: Vec<GazeLabel>,
    pub centroid_main: Option<(f64, f64)>,
    pub centroid_other: Option<(f64, f64)>,
    pub linkage: Linkage,
}

impl GazeClustering {
    /// A stream of `n` frames without any detected face.
    pub fn undetected(n: usize) -> Self {
        GazeClustering {
            assignments: vec![GazeLabel::NoFace; n],
            centroid_main: None,
            centroid_other: None,
            linkage: Linkage::default(),
        }
    }

    pub fn count(&self, label: GazeLabel) -> usize {
        self.assignments.iter().filter(|&&l| l == label).count()
    }
}

fn centroid(points: &[[f64; 2]]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    (sx / n, sy / n)
}

/// Splits the gaze angles of face-detected frames into a main direction
/// (the largest cluster) and everything else.
///
/// Ties in cluster size go to the cluster whose centroid is closer to the
/// origin, then to the lexicographically smaller centroid.
pub fn cluster_gaze(frames: &[FrameRecord], params: &GazeParams) -> Result<GazeClustering, NonverbalError> {
    if params.k < 2 {
        return Err(NonverbalError::InvalidClusterCount(params.k));
    }
    let detected: Vec<usize> = (0..frames.len()).filter(|&i| frames[i].face_detected).collect();
    if detected.len() < 2 {
        return Err(NonverbalError::TooFewFrames(detected.len()));
    }
    let points: Vec<[f64; 2]> = detected
        .iter()
        .map(|&i| [frames[i].gaze_x, frames[i].gaze_y])
        .collect();

    let mut assignments = vec![GazeLabel::NoFace; frames.len()];
    if points.iter().all(|p| *p == points[0]) {
        for &i in &detected {
            assignments[i] = GazeLabel::Main;
        }
        return Ok(GazeClustering {
            assignments,
            centroid_main: Some((points[0][0], points[0][1])),
            centroid_other: None,
            linkage: params.linkage,
        });
    }

    let labels = match params.max_points {
        Some(m) if m >= 2 && points.len() > m => {
            let stride: Vec<usize> = (0..m).map(|j| j * points.len() / m).collect();
            let sample: Vec<[f64; 2]> = stride.iter().map(|&j| points[j]).collect();
            let sample_labels = linkage::cluster(&sample, params.linkage, params.k)?;
            let n_clusters = sample_labels.iter().max().map_or(0, |m| m + 1);
            let centroids: Vec<(f64, f64)> = (0..n_clusters)
                .map(|c| {
                    let members: Vec<[f64; 2]> = sample
                        .iter()
                        .zip(&sample_labels)
                        .filter(|(_, &l)| l == c)
                        .map(|(p, _)| *p)
                        .collect();
                    centroid(&members)
                })
                .collect();
            points
                .iter()
                .map(|p| {
                    (0..n_clusters)
                        .min_by(|&a, &b| {
                            let da = (p[0] - centroids[a].0).powi(2) + (p[1] - centroids[a].1).powi(2);
                            let db = (p[0] - centroids[b].0).powi(2) + (p[1] - centroids[b].1).powi(2);
                            da.total_cmp(&db)
                        })
                        .unwrap_or(0)
                })
                .collect()
        }
        _ => linkage::cluster(&points, params.linkage, params.k)?,
    };

    let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
    let groups: Vec<Vec<[f64; 2]>> = (0..n_clusters)
        .map(|c| {
            points
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| *p)
                .collect()
        })
        .collect();
    let main = (0..n_clusters)
        .filter(|&c| !groups[c].is_empty())
        .min_by(|&a, &b| {
            let (ca, cb) = (centroid(&groups[a]), centroid(&groups[b]));
            groups[b]
                .len()
                .cmp(&groups[a].len())
                .then((ca.0.hypot(ca.1)).total_cmp(&cb.0.hypot(cb.1)))
                .then(ca.0.total_cmp(&cb.0))
                .then(ca.1.total_cmp(&cb.1))
        })
        .expect("non-empty clustering");
    let others: Vec<[f64; 2]> = points
        .iter()
        .zip(&labels)
        .filter(|(_, &l)| l != main)
        .map(|(p, _)| *p)
        .collect();
    for (&frame, &label) in detected.iter().zip(&labels) {
        assignments[frame] = if label == main {
            GazeLabel::Main
        } else {
            GazeLabel::Other
        };
    }
    Ok(GazeClustering {
        assignments,
        centroid_main: Some(centroid(&groups[main])),
        centroid_other: (!others.is_empty()).then(|| centroid(&others)),
        linkage: params.linkage,
    })
}

fn check_lengths(a: usize, b: usize) -> Result<(), NonverbalError> {
    if a != 0 && b != 0 && a != b {
        return Err(NonverbalError::LengthMismatch(a, b));
    }
    Ok(())
}

/// `(gaze_share, mutual_gaze_share)`: the teacher's main-direction share over
/// its face frames, and the share of frames where both look in their main
/// direction over frames where either face was detected.
pub fn gaze_shares(teacher: &GazeClustering, parent: &GazeClustering) -> Result<(f64, f64), NonverbalError> {
    let (t, p) = (&teacher.assignments, &parent.assignments);
    check_lengths(t.len(), p.len())?;
    let face_t = t.iter().filter(|&&l| l != GazeLabel::NoFace).count();
    if face_t == 0 {
        return Err(NonverbalError::NoFaceFrames);
    }
    let main_t = teacher.count(GazeLabel::Main);
    let mut either = 0usize;
    let mut both_main = 0usize;
    for (i, &lt) in t.iter().enumerate() {
        let lp = p.get(i).copied().unwrap_or(GazeLabel::NoFace);
        if lt != GazeLabel::NoFace || lp != GazeLabel::NoFace {
            either += 1;
        }
        if lt == GazeLabel::Main && lp == GazeLabel::Main {
            both_main += 1;
        }
    }
    Ok((main_t as f64 / face_t as f64, both_main as f64 / either as f64))
}

/// `(smile_share, mutual_smile_share)` with smiling meaning
/// `smile_p >= threshold` on a face-detected frame.
pub fn smile_shares(
    teacher: &[FrameRecord],
    parent: &[FrameRecord],
    threshold: f64,
) -> Result<(f64, f64), NonverbalError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(NonverbalError::InvalidThreshold(threshold));
    }
    check_lengths(teacher.len(), parent.len())?;
    let smiling = |f: &FrameRecord| f.face_detected && f.smile_p >= threshold;
    let mut face_t = 0usize;
    let mut smile_t = 0usize;
    let mut either = 0usize;
    let mut both = 0usize;
    for (i, ft) in teacher.iter().enumerate() {
        let fp = parent.get(i);
        let face_p = fp.is_some_and(|f| f.face_detected);
        if ft.face_detected {
            face_t += 1;
        }
        if ft.face_detected || face_p {
            either += 1;
        }
        if smiling(ft) {
            smile_t += 1;
            if fp.is_some_and(smiling) {
                both += 1;
            }
        }
    }
    if face_t == 0 {
        return Err(NonverbalError::NoFaceFrames);
    }
    Ok((smile_t as f64 / face_t as f64, both as f64 / either as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Emotion {
    Happy,
    Sad,
    Anger,
    Other,
}

/// Most probable emotion; ties resolve in the order happy, sad, anger, other.
pub fn dominant_emotion(f: &FrameRecord) -> Emotion {
    let ranked = [
        (Emotion::Happy, f.happy_p),
        (Emotion::Sad, f.sad_p),
        (Emotion::Anger, f.anger_p),
        (Emotion::Other, f.other_p),
    ];
    let mut best = ranked[0];
    for cand in &ranked[1..] {
        if cand.1 > best.1 {
            best = *cand;
        }
    }
    best.0
}

/// `(happy, sad, anger)` shares of face-detected frames by dominant emotion.
pub fn emotion_shares(frames: &[FrameRecord]) -> Result<(f64, f64, f64), NonverbalError> {
    let mut counts = [0usize; 4];
    let mut n = 0usize;
    for f in frames.iter().filter(|f| f.face_detected) {
        counts[dominant_emotion(f) as usize] += 1;
        n += 1;
    }
    if n == 0 {
        return Err(NonverbalError::NoFaceFrames);
    }
    let n = n as f64;
    Ok((counts[0] as f64 / n, counts[1] as f64 / n, counts[2] as f64 / n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonverbalFeatures {
    pub gaze_share: f64,
    pub mutual_gaze_share: f64,
    pub smile_share: f64,
    pub mutual_smile_share: f64,
    pub happy_share: f64,
    pub sad_share: f64,
    pub anger_share: f64,
}

/// Nonverbal features of the teacher. A parent stream that is missing or has
/// fewer than two detected faces contributes no mutual gaze.
pub fn nonverbal_features(
    grid: &FrameGrid,
    gaze: &GazeParams,
    smile_threshold: f64,
) -> Result<NonverbalFeatures, NonverbalError> {
    let teacher = grid.frames(Role::Teacher);
    let parent = grid.frames(Role::Parent);
    let ct = cluster_gaze(teacher, gaze)?;
    let cp = match cluster_gaze(parent, gaze) {
        Ok(c) => c,
        Err(NonverbalError::TooFewFrames(_)) => GazeClustering::undetected(parent.len()),
        Err(e) => return Err(e),
    };
    let (gaze_share, mutual_gaze_share) = gaze_shares(&ct, &cp)?;
    let (smile_share, mutual_smile_share) = smile_shares(teacher, parent, smile_threshold)?;
    let (happy_share, sad_share, anger_share) = emotion_shares(teacher)?;
    Ok(NonverbalFeatures {
        gaze_share,
        mutual_gaze_share,
        smile_share,
        mutual_smile_share,
        happy_share,
        sad_share,
        anger_share,
    })
}
