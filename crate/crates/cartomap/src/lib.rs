//! File formats, pipeline stages, tile pyramids and the HTTP map server
//! built on `cartomap-core`.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod index_io;
pub mod ingest;
pub mod lru;
pub mod pipeline;
pub mod server;
pub mod service;
pub mod snapshot_io;
pub mod tiles;

pub use error::{Error, Result};
