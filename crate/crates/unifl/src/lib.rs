//! File formats, configuration, parallel execution and the command-line
//! pipeline around `unifl-core`.

pub mod config;
pub mod dataset_io;
pub mod error;
pub mod exec;
pub mod pipeline;
pub mod results;
pub mod vocab_file;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use exec::RayonExecutor;
