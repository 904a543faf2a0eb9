//! Counter-style seeding: every path owns a ChaCha stream derived from
//! `(master, stream, run, path)`, so ensembles are bit-identical no matter how
//! paths are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master: u64,
    #[serde(default)]
    pub stream: u64,
}

impl SeedSpec {
    pub fn new(master: u64) -> Self {
        Self { master, stream: 0 }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    /// Generator for path `path` of ensemble run `run`.
    pub fn path_rng(&self, run: u64, path: u64) -> ChaCha8Rng {
        let mut state = self.master;
        let mut seed = [0u8; 32];
        let words = [
            splitmix64(&mut state) ^ self.stream.wrapping_mul(0xD134_2543_DE82_EF95),
            splitmix64(&mut state) ^ run.wrapping_mul(0xA24B_AED4_963E_E407),
            splitmix64(&mut state) ^ path.wrapping_mul(0x9FB2_1C65_1E98_DF25),
            splitmix64(&mut state),
        ];
        let mut mix = words[0] ^ words[1].rotate_left(17) ^ words[2].rotate_left(41);
        for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
            let v = splitmix64(&mut mix) ^ w;
            chunk.copy_from_slice(&v.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

impl Default for SeedSpec {
    fn default() -> Self {
        Self::new(20_070_501)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
