//! File formats, instance generators, experiment drivers and the property
//! suite behind the `pacbound` binary.

pub mod error;
pub mod experiment;
pub mod format;
pub mod generate;
pub mod output;
pub mod svg;
pub mod verify;

pub use error::{CliError, Result};
