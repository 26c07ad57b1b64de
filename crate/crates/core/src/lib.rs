pub mod config;
pub mod container;
pub mod dataset;
pub mod distill;
pub mod error;
pub mod flops;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod pruner;
pub mod rng;
pub mod spectrum;
pub mod train;

pub use error::{Error, Result};
