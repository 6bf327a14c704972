//! Visual feedback: parallel-coordinates plots over the cohort and radar
//! charts comparing one session with the best-rated group.
//!
//! Plot construction is split from rendering so the numbers behind every
//! vertex can be inspected and tested. All inputs are put in canonical
//! session order first, which makes the SVG output independent of input
//! order.

pub mod svg;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{relative_deviation, Feature, SessionFeatures};
use svg::Svg;

#[derive(Debug, Error, PartialEq)]
pub enum FeedbackError {
    #[error("no session carries a rating")]
    NoRatedSessions,
    #[error("cohort has no rated session to compare with")]
    NoReferenceGroup,
    #[error("no axes to plot")]
    NoAxes,
    #[error("no sessions to plot")]
    NoSessions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Paraverbal,
    Nonverbal,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Paraverbal => "paraverbal",
            Subset::Nonverbal => "nonverbal",
        }
    }

    pub fn contains(self, f: Feature) -> bool {
        f.is_paraverbal() == (self == Subset::Paraverbal)
    }
}

pub const UNRATED_COLOR: &str = "#808080";

/// Blue at the lowest observed rating, red at the highest, linear in RGB.
/// A single observed rating sits halfway.
pub fn rating_color(rating: u8, lo: u8, hi: u8) -> String {
    let t = if hi > lo {
        (f64::from(rating) - f64::from(lo)) / f64::from(hi - lo)
    } else {
        0.5
    };
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}00{b:02x}")
}

/// `(v − min)/(max − min)`; a degenerate axis maps everything to 0.5.
pub fn normalize(v: f64, (min, max): (f64, f64)) -> f64 {
    if max > min {
        (v - min) / (max - min)
    } else {
        0.5
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotLine {
    /// Session id, or `rating <r>` for grouped lines.
    pub label: String,
    pub rating: Option<u8>,
    pub color: String,
    /// Raw values per axis; grouped lines hold the group mean.
    pub values: Vec<Option<f64>>,
    pub normalized: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParallelPlotSpec {
    pub subset: Subset,
    pub grouped: bool,
    pub axes: Vec<Feature>,
    /// `(min, max)` of the plotted values per axis.
    pub ranges: Vec<(f64, f64)>,
    pub lines: Vec<PlotLine>,
}

fn canonical(sessions: &[SessionFeatures]) -> Vec<&SessionFeatures> {
    let mut v: Vec<&SessionFeatures> = sessions.iter().collect();
    v.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    v
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Builds the plot for the features of `subset`, in `axis_order`.
pub fn parallel_spec(
    sessions: &[SessionFeatures],
    subset: Subset,
    grouped: bool,
    axis_order: &[Feature],
) -> Result<ParallelPlotSpec, FeedbackError> {
    let axes: Vec<Feature> = axis_order.iter().copied().filter(|&f| subset.contains(f)).collect();
    if axes.is_empty() {
        return Err(FeedbackError::NoAxes);
    }
    if sessions.is_empty() {
        return Err(FeedbackError::NoSessions);
    }
    let sorted = canonical(sessions);
    let ratings: Vec<u8> = sorted.iter().filter_map(|s| s.rating).collect();
    let (lo, hi) = (ratings.iter().min().copied(), ratings.iter().max().copied());
    let color = |r: Option<u8>| match (r, lo, hi) {
        (Some(r), Some(lo), Some(hi)) => rating_color(r, lo, hi),
        _ => UNRATED_COLOR.to_string(),
    };

    let mut lines: Vec<PlotLine> = if grouped {
        if ratings.is_empty() {
            return Err(FeedbackError::NoRatedSessions);
        }
        let mut levels = ratings.clone();
        levels.sort_unstable();
        levels.dedup();
        levels
            .into_iter()
            .map(|r| {
                let members: Vec<&&SessionFeatures> = sorted.iter().filter(|s| s.rating == Some(r)).collect();
                PlotLine {
                    label: format!("rating {r}"),
                    rating: Some(r),
                    color: color(Some(r)),
                    values: axes.iter().map(|&f| mean_of(members.iter().map(|s| s.get(f)))).collect(),
                    normalized: Vec::new(),
                }
            })
            .collect()
    } else {
        let mut order = sorted.clone();
        // higher ratings are drawn last, on top
        order.sort_by(|a, b| a.rating.cmp(&b.rating).then(a.session_id.cmp(&b.session_id)));
        order
            .into_iter()
            .map(|s| PlotLine {
                label: s.session_id.clone(),
                rating: s.rating,
                color: color(s.rating),
                values: axes.iter().map(|&f| s.get(f)).collect(),
                normalized: Vec::new(),
            })
            .collect()
    };

    let ranges: Vec<(f64, f64)> = (0..axes.len())
        .map(|a| {
            lines
                .iter()
                .filter_map(|l| l.values[a])
                .fold(None, |acc: Option<(f64, f64)>, v| {
                    Some(acc.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))))
                })
                .unwrap_or((0.0, 0.0))
        })
        .collect();
    for line in &mut lines {
        line.normalized = line
            .values
            .iter()
            .zip(&ranges)
            .map(|(v, &r)| v.map(|v| normalize(v, r)))
            .collect();
    }
    Ok(ParallelPlotSpec {
        subset,
        grouped,
        axes,
        ranges,
        lines,
    })
}

const PAR_W: u32 = 1000;
const PAR_H: u32 = 600;
const PAR_LEFT: f64 = 80.0;
const PAR_RIGHT: f64 = 80.0;
const PAR_TOP: f64 = 70.0;
const PAR_BOTTOM: f64 = 90.0;

fn fmt_tick(v: f64) -> String {
    crate::aggregate::format_2dp(Some(v))
}

/// Splits a sequence of optional points into runs of present points.
fn runs(points: impl Iterator<Item = Option<(f64, f64)>>) -> Vec<Vec<(f64, f64)>> {
    let mut out = vec![Vec::new()];
    for p in points {
        match p {
            Some(p) => out.last_mut().expect("non-empty").push(p),
            None if !out.last().expect("non-empty").is_empty() => out.push(Vec::new()),
            None => {}
        }
    }
    out.retain(|r| !r.is_empty());
    out
}

pub fn render_parallel(spec: &ParallelPlotSpec) -> String {
    let plot_w = f64::from(PAR_W) - PAR_LEFT - PAR_RIGHT;
    let plot_h = f64::from(PAR_H) - PAR_TOP - PAR_BOTTOM;
    let n = spec.axes.len();
    let x = |i: usize| {
        if n == 1 {
            PAR_LEFT + plot_w / 2.0
        } else {
            PAR_LEFT + plot_w * i as f64 / (n - 1) as f64
        }
    };
    let y = |t: f64| PAR_TOP + (1.0 - t) * plot_h;

    let mut svg = Svg::new(PAR_W, PAR_H);
    let title = format!(
        "{} features{}",
        spec.subset.as_str(),
        if spec.grouped { " grouped by rating" } else { "" }
    );
    svg.text((f64::from(PAR_W) / 2.0, 30.0), 16, "middle", &title);
    for (i, (f, &(lo, hi))) in spec.axes.iter().zip(&spec.ranges).enumerate() {
        svg.line((x(i), y(0.0)), (x(i), y(1.0)), "#404040", 1.0);
        svg.text((x(i), y(1.0) - 8.0), 10, "middle", &fmt_tick(hi));
        svg.text((x(i), y(0.0) + 16.0), 10, "middle", &fmt_tick(lo));
        svg.text((x(i), y(0.0) + 40.0), 11, "middle", f.display_name());
    }
    for line in &spec.lines {
        let pts = line
            .normalized
            .iter()
            .enumerate()
            .map(|(i, v)| v.map(|t| (x(i), y(t))));
        for run in runs(pts) {
            svg.path(&run, &line.color, if spec.grouped { 3.0 } else { 1.5 }, false, &line.label);
        }
    }
    let mut legend: Vec<(Option<u8>, &str)> = spec.lines.iter().map(|l| (l.rating, l.color.as_str())).collect();
    legend.sort();
    legend.dedup();
    for (k, (rating, color)) in legend.iter().enumerate() {
        let ly = f64::from(PAR_H) - 20.0;
        let lx = PAR_LEFT + 110.0 * k as f64;
        svg.line((lx, ly - 4.0), (lx + 24.0, ly - 4.0), color, 3.0);
        let label = rating.map_or("unrated".to_string(), |r| format!("rating {r}"));
        svg.text((lx + 30.0, ly), 11, "start", &label);
    }
    svg.finish()
}

/// Builds and renders in one step.
pub fn parallel_plot(
    sessions: &[SessionFeatures],
    subset: Subset,
    grouped: bool,
    axis_order: &[Feature],
) -> Result<String, FeedbackError> {
    Ok(render_parallel(&parallel_spec(sessions, subset, grouped, axis_order)?))
}

pub fn clip(v: f64, lo: f64, hi: f64) -> f64 {
    v.clamp(lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarProfile {
    pub session_id: String,
    pub reference_rating: u8,
    pub reference_sessions: Vec<String>,
    pub features: Vec<Feature>,
    /// Relative deviation from the reference mean before clipping; `None`
    /// where the reference mean is zero or the value is missing.
    pub raw_deviations: Vec<Option<f64>>,
    pub deviations: Vec<Option<f64>>,
    pub clip: (f64, f64),
}

/// Compares `target` with the mean of the sessions holding the highest
/// rating in `cohort`.
pub fn radar_profile(
    target: &SessionFeatures,
    cohort: &[SessionFeatures],
    axes: &[Feature],
    clip_bounds: (f64, f64),
) -> Result<RadarProfile, FeedbackError> {
    if axes.is_empty() {
        return Err(FeedbackError::NoAxes);
    }
    let sorted = canonical(cohort);
    let best = sorted
        .iter()
        .filter_map(|s| s.rating)
        .max()
        .ok_or(FeedbackError::NoReferenceGroup)?;
    let group: Vec<&&SessionFeatures> = sorted.iter().filter(|s| s.rating == Some(best)).collect();
    let raw: Vec<Option<f64>> = axes
        .iter()
        .map(|&f| {
            let mean = mean_of(group.iter().map(|s| s.get(f)))?;
            relative_deviation(target.get(f)?, mean)
        })
        .collect();
    Ok(RadarProfile {
        session_id: target.session_id.clone(),
        reference_rating: best,
        reference_sessions: group.iter().map(|s| s.session_id.clone()).collect(),
        features: axes.to_vec(),
        deviations: raw
            .iter()
            .map(|d| d.map(|d| clip(d, clip_bounds.0, clip_bounds.1)))
            .collect(),
        raw_deviations: raw,
        clip: clip_bounds,
    })
}

const RADAR_SIZE: u32 = 600;
const RADAR_INNER: f64 = 40.0;
const RADAR_OUTER: f64 = 210.0;

pub fn render_radar(profile: &RadarProfile) -> String {
    let c = f64::from(RADAR_SIZE) / 2.0;
    let (lo, hi) = profile.clip;
    let radius = |d: f64| RADAR_INNER + (d - lo) / (hi - lo) * (RADAR_OUTER - RADAR_INNER);
    let n = profile.features.len();
    let angle = |i: usize| -PI / 2.0 + 2.0 * PI * i as f64 / n as f64;
    let at = |i: usize, r: f64| (c + r * angle(i).cos(), c + r * angle(i).sin());

    let mut svg = Svg::new(RADAR_SIZE, RADAR_SIZE);
    svg.text((c, 24.0), 16, "middle", &format!("{} vs. rating {}", profile.session_id, profile.reference_rating));
    let mut rings: Vec<f64> = vec![lo];
    let mut k = lo.floor() + 1.0;
    while k < hi {
        rings.push(k);
        k += 1.0;
    }
    rings.push(hi);
    for &ring in &rings {
        let (stroke, width) = if ring == 0.0 { ("#000000", 1.5) } else { ("#c0c0c0", 1.0) };
        svg.circle((c, c), radius(ring), stroke, width);
        svg.text((c + 3.0, c - radius(ring) - 2.0), 9, "start", &fmt_tick(ring));
    }
    for (i, f) in profile.features.iter().enumerate() {
        svg.line(at(i, RADAR_INNER), at(i, RADAR_OUTER), "#c0c0c0", 1.0);
        let (x, y) = at(i, RADAR_OUTER + 22.0);
        let anchor = if (x - c).abs() < 1.0 {
            "middle"
        } else if x > c {
            "start"
        } else {
            "end"
        };
        svg.text((x, y + 4.0), 11, anchor, f.display_name());
    }
    let pts: Vec<Option<(f64, f64)>> = profile
        .deviations
        .iter()
        .enumerate()
        .map(|(i, d)| d.map(|d| at(i, radius(d))))
        .collect();
    if pts.iter().all(Option::is_some) {
        let closed: Vec<(f64, f64)> = pts.into_iter().flatten().collect();
        svg.path(&closed, "#d62728", 2.0, true, &profile.session_id);
    } else {
        // rotate so a gap never splits the first run in two
        let start = pts.iter().position(Option::is_none).unwrap_or(0);
        let rotated = pts[start..].iter().chain(&pts[..start]).copied();
        for run in runs(rotated) {
            svg.path(&run, "#d62728", 2.0, false, &profile.session_id);
        }
    }
    svg.finish()
}

pub fn radar_chart(
    target: &SessionFeatures,
    cohort: &[SessionFeatures],
    axes: &[Feature],
    clip_bounds: (f64, f64),
) -> Result<(String, RadarProfile), FeedbackError> {
    let profile = radar_profile(target, cohort, axes, clip_bounds)?;
    Ok((render_radar(&profile), profile))
}
