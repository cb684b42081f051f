pub mod bench;
pub mod constrained;
pub mod data;
pub mod error;
pub mod features;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
