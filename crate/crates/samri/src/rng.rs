//! Seeded, checkpointable random streams.
//!
//! Training uses several independent streams (weight init, mask selection,
//! batch order, noise) derived from one master seed. Each stream's position
//! is part of the checkpoint so resumed runs continue bit-exactly.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreamKind {
    Init,
    Mask,
    BatchOrder,
    Noise,
}

impl StreamKind {
    fn stream_id(self) -> u64 {
        match self {
            StreamKind::Init => 1,
            StreamKind::Mask => 2,
            StreamKind::BatchOrder => 3,
            StreamKind::Noise => 4,
        }
    }
}

/// A ChaCha stream plus enough metadata to serialize its exact position.
#[derive(Debug, Clone)]
pub struct SeededStream {
    pub rng: ChaCha8Rng,
    seed: u64,
    kind: StreamKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamState {
    pub seed: u64,
    pub kind: StreamKind,
    pub word_pos: u128,
}

impl SeededStream {
    pub fn new(seed: u64, kind: StreamKind) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(kind.stream_id());
        SeededStream { rng, seed, kind }
    }

    pub fn state(&self) -> StreamState {
        StreamState {
            seed: self.seed,
            kind: self.kind,
            word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn restore(state: &StreamState) -> Self {
        let mut s = SeededStream::new(state.seed, state.kind);
        s.rng.set_word_pos(state.word_pos);
        s
    }
}
