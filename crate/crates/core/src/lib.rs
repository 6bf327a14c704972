//! Batch analytics for recorded teacher–parent counselling simulations.
//!
//! The pipeline ingests per-session extraction dumps (transcript segments
//! and frame-level face and voice signals), fuses them on a 40 ms frame
//! grid, aggregates paraverbal and nonverbal session features, and turns
//! them into feedback artifacts:
//!
//! * [`ingest`] parses and validates the corpus layout.
//! * [`timeline`] builds the frame grid and splits oversized segments.
//! * [`paraverbal`] and [`nonverbal`] compute the per-session features.
//! * [`aggregate`] assembles [`aggregate::SessionFeatures`] and the
//!   relative-deviation feedback table.
//! * [`feedback`] renders parallel-coordinates plots and radar charts as SVG.
//! * [`rating_model`] cross-validates rating classifiers.
//! * [`agreement`] compares annotation tiers of two annotators.
//! * [`synth`] generates schema-valid synthetic corpora.

pub mod aggregate;
pub mod agreement;
pub mod config;
pub mod feedback;
pub mod ingest;
pub mod nonverbal;
pub mod paraverbal;
pub mod rating_model;
pub mod synth;
pub mod timeline;
