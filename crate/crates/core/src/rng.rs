//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, block, instruction, position)`:
//! shots are grouped in blocks of 64 lanes, each instruction of each block
//! owns a disjoint window of a ChaCha8 keystream. Blocks can therefore be
//! sampled in any order, on any thread, and replayed individually.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Words reserved per instruction inside a block's stream.
const WORDS_PER_INSTRUCTION: u128 = 1 << 32;

#[derive(Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, block: u64, instruction: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(b"eml-shot");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(block);
        rng.set_word_pos(instruction as u128 * WORDS_PER_INSTRUCTION);
        Stream { rng }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in (0, 1].
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` for small `n`.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// 64 independent Bernoulli(p) lanes.
    pub fn bernoulli_mask(&mut self, p: f64, ln_q: f64) -> u64 {
        if p <= 0.0 {
            0
        } else if p >= 1.0 {
            !0
        } else if p == 0.5 {
            self.next_u64()
        } else if p > 0.25 {
            let thr = (p * (u64::MAX as f64)) as u64;
            let mut m = 0u64;
            for lane in 0..64 {
                if self.next_u64() < thr {
                    m |= 1 << lane;
                }
            }
            m
        } else {
            // Geometric gaps between successes.
            let mut m = 0u64;
            let mut i: u64 = 0;
            loop {
                let gap = (self.uniform_open0().ln() / ln_q).floor();
                if gap >= 64.0 {
                    break;
                }
                i += gap as u64;
                if i >= 64 {
                    break;
                }
                m |= 1 << i;
                i += 1;
            }
            m
        }
    }
}

/// `ln(1 - p)` in the form `bernoulli_mask` expects.
pub fn ln_q(p: f64) -> f64 {
    (-p).ln_1p()
}
