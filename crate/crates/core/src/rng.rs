//! Seeded random streams.
//!
//! Every random decision in the pipeline is drawn from a ChaCha8 generator
//! keyed by the single run seed. Each consumer owns a distinct stream id, so
//! adding draws in one stage never shifts the numbers another stage sees:
//!
//! | stream             | id                         |
//! |--------------------|----------------------------|
//! | synthetic graph    | 1                          |
//! | edge split         | 2                          |
//! | parameter init     | 3                          |
//! | training           | 4                          |
//! | evaluation         | 5                          |
//! | oracle check       | 6                          |
//! | dataset sampling   | 1000 + 16·structure + part |
//!
//! where `part` is 0 for train, 1 for valid, 2 for test.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    SyntheticGraph,
    Split,
    Init,
    Training,
    Evaluation,
    OracleCheck,
    Sampling { structure: usize, part: usize },
}

impl Stream {
    pub fn id(self) -> u64 {
        match self {
            Stream::SyntheticGraph => 1,
            Stream::Split => 2,
            Stream::Init => 3,
            Stream::Training => 4,
            Stream::Evaluation => 5,
            Stream::OracleCheck => 6,
            Stream::Sampling { structure, part } => 1000 + 16 * structure as u64 + part as u64,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
