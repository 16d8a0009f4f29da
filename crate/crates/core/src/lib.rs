//! Self-paced learning (SPL) training strategies for a one-class anchor-grid
//! object detector, evaluated on a synthetic detection task with controllable
//! sample difficulty.
//!
//! The crate is organized around the training-strategy machinery:
//!
//! - [`spl`]: minimizer functions (confidence-based and classical loss-based),
//!   a brute-force optimality oracle, and the piecewise threshold schedules.
//! - [`boxes`] / [`losses`]: CIOU box regression, anchor-level detection
//!   losses, and the SPL-weighted batch loss.
//! - [`assignment`]: static anchor labeling, object-confidence extraction and
//!   detection decoding.
//! - [`synth`]: deterministic synthetic scene generator with four difficulty
//!   levels and background distractors.
//! - [`detector`]: a tiny per-anchor MLP detector with analytic gradients and
//!   an Adam optimizer.
//! - [`trainer`]: the seven training modes (AS, ES, HEM, SPL-ESP-BC/BH/BLine/BLog).
//! - [`metrics`]: VOC-style AP, per-difficulty detection rates and the false
//!   detection rate.
//!
//! Core numeric code is generic over [`num::Real`]; the trainer and CLI use
//! the [`Scalar`] alias.

pub mod assignment;
pub mod boxes;
pub mod config;
pub mod detector;
pub mod dual;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod num;
pub mod spl;
pub mod synth;
pub mod trainer;
pub mod verify;

/// Concrete scalar type used by the trainer, generator and CLI.
pub type Scalar = f64;
/// Single-precision alias for callers that want the smaller footprint.
pub type Scalar32 = f32;

pub use boxes::BBox;
pub use error::Error;
