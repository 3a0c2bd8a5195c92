#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Similarity-transformation visual tracking.
//!
//! The tracker estimates the 4-DoF state `{tx, ty, θ, s}` of a target in
//! every frame by alternating two cheap sub-solvers:
//!
//! - translation, from a multi-channel correlation filter evaluated over a
//!   padded search window ([`cf`]), optionally fused with a color-histogram
//!   score ([`features::color`]);
//! - scale and rotation, from phase correlation of log-polar resampled
//!   patches ([`logpolar`]), where both become circular shifts.
//!
//! [`solver`] runs block coordinate descent over the two blocks with a
//! motion prior, and [`tracker`] wraps everything behind `init` / `track`.
//! [`bench`] loads OTB/POT-style sequences, renders synthetic sequences
//! with exact ground truth, and computes precision/success/alignment curves.
//!
//! # Feature flags
//! - `parallel` (default): per-channel transforms, patch sampling and
//!   multi-sequence runs go through rayon. Without it the same code runs
//!   sequentially with identical results.
//! - `image-io` (default): PNG/JPEG frame loading via the `image` crate.
//!   PGM/PPM are always available.

pub mod bench;
pub mod cf;
pub mod error;
pub mod features;
pub mod geometry;
pub mod imgproc;
pub mod logpolar;
pub mod par;
pub mod solver;
pub mod spectral;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{Quad, Rect, SimilarityState};
pub use imgproc::{Frame, Patch};
pub use solver::{ScoreBreakdown, SolverConfig};
pub use tracker::{BoxMode, TrackState, Tracker, TrackerConfig};
