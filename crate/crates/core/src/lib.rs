//! Scenario mining from highway trajectory recordings and coverage metrics
//! over the mined scenarios.
//!
//! The pipeline per recording: [`highd`] ingest, per-track [`activity`]
//! segmentation, [`ego_view`] datasets, [`mining`] of the ten scenario
//! categories, [`tagging`], and finally the [`coverage`] metrics.

// `!(x > 0.0)` is deliberate: it rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activity;
pub mod coverage;
pub mod ego_view;
pub mod exec;
pub mod highd;
pub mod mining;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod tagging;

pub use exec::Exec;
