//! Experiment driver for the mKdV core: runs the identity suites, series and
//! background checks, solver runs and audits, and writes a JSON report plus
//! CSV artifacts per experiment.

pub mod config;
pub mod experiments;
pub mod report;
pub mod soliton;
pub mod spec;

pub use report::{Report, Timed};
pub use spec::{ExperimentKind, ExperimentSpec};
