//! Deterministic random streams keyed by `(master_seed, replication, role)`.
//!
//! Each triple maps to a ChaCha key (from the master seed) and a 64-bit stream
//! id (from replication and role). ChaCha is a counter-based generator, so a
//! stream is fixed by the triple alone and replications can be drawn in any
//! order or on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Which noise source of a simulation a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamRole {
    ProcessNoise,
    AuxiliaryNoise,
}

impl StreamRole {
    fn id(self) -> u64 {
        match self {
            StreamRole::ProcessNoise => 0,
            StreamRole::AuxiliaryNoise => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStreamSpec {
    pub master_seed: u64,
    pub replication_index: u64,
    pub stream_role: StreamRole,
}

impl RandomStreamSpec {
    pub fn new(master_seed: u64, replication_index: u64, stream_role: StreamRole) -> Self {
        Self {
            master_seed,
            replication_index,
            stream_role,
        }
    }

    /// Same seed and replication, other role.
    pub fn with_role(self, stream_role: StreamRole) -> Self {
        Self {
            stream_role,
            ..self
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.master_seed;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        // Replication indices stay far below 2^63, so the role bit never collides.
        rng.set_stream((self.replication_index << 1) | self.stream_role.id());
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
