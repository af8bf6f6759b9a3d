//! Everything around the core algorithms: file formats, the embedding
//! service client, experiment orchestration and the `embinv` CLI.

pub mod client;
pub mod emb1;
pub mod error;
pub mod experiment;
pub mod io;
pub mod manifest;
pub mod persist;
pub mod stub;

pub use error::{PipelineError, Result};
