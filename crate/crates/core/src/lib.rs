pub mod config;
pub mod data;
pub mod defaults;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod population;
pub mod replication;
pub mod sampler;
pub mod scoring;
pub mod simulate;
pub mod stats;
pub mod transform;

pub use error::{Error, Result};
