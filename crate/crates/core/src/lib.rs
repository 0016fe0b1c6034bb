pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod fsutil;
pub mod kgraph;
pub mod model;
pub mod numkernel;
pub mod querydag;
pub mod rng;
pub mod sampler;
pub mod training;

pub use error::{GqeError, Result};
