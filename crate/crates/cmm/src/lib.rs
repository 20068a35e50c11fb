//! File formats, configuration, reports and the run/compare harness around
//! [`cmm_core`]. The `cmmode` binary is a thin front-end over [`harness`].

pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod report;

pub use config::{GeneratorSpec, MeshSource, RunConfig};
pub use error::{Error, Result};
pub use harness::{compare, run, Arm, ComparePlan};
pub use report::{ComparisonReport, RunReport};

pub use cmm_core;
