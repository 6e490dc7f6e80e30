//! Counter-based random substreams.
//!
//! Every random draw in a simulation comes from a ChaCha8 stream keyed by
//! the run seed and addressed by `(purpose, node, slot)`. Channel outcomes
//! therefore do not depend on which policy is running, which is what makes
//! paired policy comparisons meaningful.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for; each purpose gets its own stream ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Channel = 0,
    Arrival = 1,
    TieBreak = 2,
    Drift = 3,
}

/// Words reserved per slot inside a (purpose, node) stream.
const WORDS_PER_SLOT: u128 = 1 << 16;

#[derive(Clone, Debug)]
pub struct Substreams {
    key: [u8; 32],
}

impl Substreams {
    pub fn new(seed: u64) -> Self {
        let mut expand = ChaCha8Rng::seed_from_u64(seed);
        let mut key = [0u8; 32];
        rand::RngCore::fill_bytes(&mut expand, &mut key);
        Substreams { key }
    }

    /// Fresh generator for `(purpose, node, slot)`; the same address always
    /// yields the same sequence.
    pub fn stream(&self, purpose: Purpose, node: u64, slot: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(((purpose as u64) << 56) | (node & ((1 << 56) - 1)));
        rng.set_word_pos(slot as u128 * WORDS_PER_SLOT);
        rng
    }
}

/// Seed for the `index`-th independent run derived from `seed` (sweeps,
/// Monte Carlo replicas).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
