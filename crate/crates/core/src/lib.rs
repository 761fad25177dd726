//! Mining gameplay videos for issue reports.
//!
//! The crate works on video derivatives rather than media: timed subtitles
//! and per-frame color histograms. From these it
//!
//! * cuts each video into segments at shot transitions shifted by the
//!   streamer's reaction time and snapped to the end of the spoken sentence
//!   ([`segmentation`]),
//! * classifies segments into one of five issue labels ([`features`],
//!   [`models`]),
//! * groups informative segments by game context and then by specific issue
//!   ([`clustering`]),
//! * and assembles a context → category → issue hierarchy ([`pipeline`]).
//!
//! [`evalstats`] holds the evaluation mathematics: MoJoFM, Cohen's kappa,
//! Mann-Whitney U, Cliff's delta, Benjamini-Hochberg and the Monte-Carlo
//! power simulations.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod error;
pub mod evalstats;
pub mod features;
pub mod frames;
pub mod models;
pub mod pipeline;
pub mod rng;
pub mod segmentation;
pub mod subtitle;
pub mod synthetic;

pub use error::{Error, Result};

/// Timestamps and durations, in milliseconds.
pub type Millis = u64;
