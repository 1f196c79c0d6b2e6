//! Counter-based random streams.
//!
//! Every random decision in a simulation is keyed by
//! `(seed, trial, purpose, node, round)` and hashed into a fresh value, so the
//! outcome of one coin never depends on how many other coins were drawn
//! before it. Trials can run in any order or in parallel and still reproduce
//! bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a single well-mixed 64-bit key.
pub fn derive_seed(words: &[u64]) -> u64 {
    let mut h = GOLDEN;
    for &w in words {
        h = mix64(h ^ mix64(w.wrapping_add(GOLDEN)));
    }
    h
}

/// What a coin is used for. Distinct purposes never share a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    SenderFault = 1,
    ReceiverFault = 2,
    Transmit = 3,
    Coding = 4,
    Generator = 5,
}

/// Stream factory for one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoinStream {
    seed: u64,
    trial: u64,
}

impl CoinStream {
    pub fn new(seed: u64, trial: u64) -> Self {
        Self { seed, trial }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trial(&self) -> u64 {
        self.trial
    }

    #[inline]
    pub fn key(&self, purpose: Purpose, node: usize, round: u64) -> u64 {
        derive_seed(&[self.seed, self.trial, purpose as u64, node as u64, round])
    }

    /// Uniform value in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&self, purpose: Purpose, node: usize, round: u64) -> f64 {
        (self.key(purpose, node, round) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `true` with probability `prob`. `prob >= 1` is always true and
    /// `prob <= 0` is always false.
    #[inline]
    pub fn bernoulli(&self, purpose: Purpose, node: usize, round: u64, prob: f64) -> bool {
        if prob >= 1.0 {
            true
        } else if prob <= 0.0 {
            false
        } else {
            self.uniform(purpose, node, round) < prob
        }
    }

    /// A full generator for draws that need more than one word.
    pub fn rng(&self, purpose: Purpose, node: usize, round: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key(purpose, node, round))
    }
}
