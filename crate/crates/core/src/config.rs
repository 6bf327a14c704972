//! Run configuration shared by the pipeline stages and the CLI.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::Feature;
use crate::ingest::{LoadDefaults, DEFAULT_FPS, DEFAULT_SAMPLE_RATE};
use crate::nonverbal::GazeParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Frame rate assumed when a session does not declare one.
    pub fps: u32,
    pub sample_rate: u32,
    /// A face-detected frame counts as smiling when its smile probability
    /// reaches this value.
    pub smile_threshold: f64,
    pub gaze: GazeParams,
    /// Radar deviations are clipped to `[clip_min, clip_max]`.
    pub clip_min: f64,
    pub clip_max: f64,
    /// Axis order of parallel plots and radar charts; defaults to all
    /// features in their canonical order.
    pub axis_order: Vec<Feature>,
    pub cv_folds: usize,
    pub seed: u64,
    /// Split multi-sentence segments before computing features. Off by
    /// default so statement shares count sentences per segment.
    pub split_segments: bool,
    /// Keep annotation subcategories in coincidence matrices.
    pub keep_subcategories: bool,
    /// Rasterization step for annotation tiers in seconds.
    pub agreement_step_s: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            fps: DEFAULT_FPS,
            sample_rate: DEFAULT_SAMPLE_RATE,
            smile_threshold: 0.5,
            gaze: GazeParams::default(),
            clip_min: -2.0,
            clip_max: 2.0,
            axis_order: Feature::ALL.to_vec(),
            cv_folds: 5,
            seed: 0,
            split_segments: false,
            keep_subcategories: false,
            agreement_step_s: 0.04,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.fps == 0 || self.sample_rate == 0 {
            return bad("fps and sample_rate must be positive".into());
        }
        if !(self.smile_threshold > 0.0 && self.smile_threshold < 1.0) {
            return bad(format!("smile_threshold {} must lie in (0, 1)", self.smile_threshold));
        }
        if self.gaze.k < 2 {
            return bad(format!("gaze.k must be at least 2, got {}", self.gaze.k));
        }
        if !(self.clip_min < 0.0 && self.clip_max > 0.0) {
            return bad(format!("clip bounds [{}, {}] must straddle 0", self.clip_min, self.clip_max));
        }
        if self.axis_order.is_empty() {
            return bad("axis_order is empty".into());
        }
        for (i, f) in self.axis_order.iter().enumerate() {
            if self.axis_order[..i].contains(f) {
                return bad(format!("axis_order repeats {}", f.key()));
            }
        }
        if self.cv_folds < 2 {
            return bad(format!("cv_folds must be at least 2, got {}", self.cv_folds));
        }
        if !(self.agreement_step_s > 0.0 && self.agreement_step_s.is_finite()) {
            return bad(format!("agreement_step_s {} must be positive", self.agreement_step_s));
        }
        Ok(())
    }

    pub fn load_defaults(&self) -> LoadDefaults {
        LoadDefaults {
            fps: self.fps,
            sample_rate: self.sample_rate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.fps, cfg.cv_folds, cfg.clip_min, cfg.clip_max), (25, 5, -2.0, 2.0));
        assert_eq!(cfg.axis_order.len(), 17);
    }

    #[test]
    fn partial_json_keeps_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"seed": 9, "gaze": {"linkage": "average", "k": 3, "max_points": null}}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.gaze.k, 3);
        assert_eq!(cfg.smile_threshold, 0.5);
    }

    #[test]
    fn unknown_and_invalid_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 9}"#).is_err());
        let cfg = RunConfig {
            axis_order: vec![Feature::Gaze, Feature::Gaze],
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"axis_order": ["gaze", "speaking_rate"]}"#).unwrap();
        assert_eq!(cfg.axis_order, vec![Feature::Gaze, Feature::SpeakingRate]);
    }
}
