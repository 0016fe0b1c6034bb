//! Max-margin training with a two-stage curriculum: edge prediction to
//! convergence, then weighted per-structure batches with standard and hard
//! negatives, optimized with Adam.

mod optimizer;
mod trainer;

pub use optimizer::{AdamConstants, OptimizerState};
pub use trainer::{
    train, train_stage1_edges, train_stage2_full, LogRecord, Stages, TrainConfig, TrainOutcome,
    Validation,
};

#[cfg(test)]
mod tests;
