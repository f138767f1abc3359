//! Scenario runner: parses scenario files, executes the stage pipeline and
//! writes CSV artifacts with a manifest.

pub mod error;
pub mod output;
pub mod pipeline;
pub mod registry;
pub mod scenario;

pub use error::CliError;
pub use pipeline::{run, RunOutcome, ToleranceProfile};
pub use scenario::Scenario;
