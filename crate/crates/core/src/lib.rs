//! Micro-expression spotting in long grayscale video sequences.
//!
//! Two spotters share one evaluation protocol:
//!
//! 1. **LTP-ML** – per-ROI temporal PCA ([`ltp`]), local temporal patterns,
//!    a linear SVM trained leave-one-subject-out ([`classify`]) and a
//!    local-to-global fusion of the per-ROI decisions ([`fusion`]).
//! 2. **LBP-χ²** – uniform LBP histograms on a 6×6 face grid, χ² feature
//!    differences over an interval and per-sub-video peak selection
//!    ([`lbpchi2`]).
//!
//! Spotted intervals are scored against ground truth with interval IoU and
//! database-level recall / precision / F1 ([`metrics`]). [`synth`] renders
//! controlled synthetic sequences for end-to-end checks.
//!
//! Frame indices are 1-based throughout.

pub mod classify;
pub mod dataio;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod hexfloat;
pub mod lbpchi2;
pub mod ltp;
pub mod metrics;
pub mod synth;
pub mod windowing;

pub use error::{Error, Result};
