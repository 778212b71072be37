//! Experiment runner for the quantization gradient flows in `quantlab-core`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiments;
mod outcome;
mod registry;
mod runner;
mod settings;

pub use outcome::{Assertion, Outcome, Table, Value};
pub use registry::{Experiment, Registry};
pub use runner::{run_experiment, CliError, Summary};
pub use settings::{ConfigFile, Overrides, Settings};
