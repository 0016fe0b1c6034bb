//! The query embedding model: node encoder, projection and intersection
//! operators, cosine scoring, Kahn-order query encoding and the exact
//! parameterization that decides observed-denotation membership.

mod forward;
mod params;

pub use forward::{LossOutcome, OpCounts, QueryEmbedding, Recorder};
pub use params::{exact_parameters, Mode, ModelParams, Psi, Variant, EXACT_MEMORY_BUDGET, INIT_NOISE};

#[cfg(test)]
mod tests;
