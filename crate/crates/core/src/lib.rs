//! Desk-scale continual-learning laboratory for GUI-agent policies.
//!
//! A compact linear-softmax policy acts over a discretized GUI action space
//! (grid clicks, text tokens, scrolls, app launches, navigation). Synthetic
//! task suites with controllable domain shift stand in for real app corpora,
//! and a continual-learning driver trains the policy task-by-task under
//! strict data isolation with several update rules:
//!
//! - plain supervised fine-tuning (SFT), optionally with KL anchoring or
//!   historical replay,
//! - group-relative policy optimization (GRPO) with clipped ratios and a
//!   per-task KL reference,
//! - the hybrid rule combining both: error-aware routing of SFT updates,
//!   an entropy-regulated SFT weight, and conditional gradient surgery.
//!
//! Everything is exact and seeded: analytic gradients (finite-difference
//! checked), a counter-based RNG addressed by `(seed, stream)`, and text
//! formats that round-trip bit-for-bit. The [`theory`] module numerically
//! verifies the first-order entropy dynamics the hybrid schedule relies on.

pub mod action;
pub mod config;
pub mod data;
pub mod error;
pub mod exec;
pub mod format;
pub mod grpo;
pub mod hybrid;
pub mod metrics;
pub mod policy;
pub mod protocol;
pub mod report;
pub mod reward;
pub mod rng;
pub mod sft;
pub mod suite;
pub mod theory;

pub use error::{Error, Result};
