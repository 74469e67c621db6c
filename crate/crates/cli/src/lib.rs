//! Batch front end for the fluxtorque solver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod config;
pub mod error;
pub mod jobs;
pub mod units;

pub use config::JobConfig;
pub use error::CliError;
pub use jobs::{run_job, RunOptions, RunReport};

/// Configuration used by `materials` when no `--config` is given: the
/// bundled InSb substrate without field.
pub const DEFAULT_MATERIALS_CONFIG: &str = r#"{
  "substrate": "InSb-n-doped",
  "particle": "NaCl",
  "d_s": {"value": 100, "unit": "nm"},
  "thermal": {"t_p": {"value": 300, "unit": "K"}, "t_e": {"value": 300, "unit": "K"}},
  "job": {"kind": "materials"}
}"#;
