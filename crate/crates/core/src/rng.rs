//! Seeded random substreams.
//!
//! Every Monte Carlo trial draws from its own ChaCha stream, addressed by
//! `(seed, index)`. A trial's randomness therefore never depends on which
//! worker ran it or in what order, so counts aggregated from any thread
//! pool are identical.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A family of independent random streams rooted at one seed.
#[derive(Debug, Clone)]
pub struct SeedStreams {
    root: ChaCha8Rng,
    seed: u64,
}

impl SeedStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            root: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The `index`-th stream of this family.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.root.clone();
        rng.set_stream(index);
        rng
    }

    /// A child family, independent of this family's streams and of other children.
    pub fn child(&self, index: u64) -> SeedStreams {
        SeedStreams::new(mix(self.seed, index))
    }
}

/// Convenience: the `index`-th stream rooted at `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    SeedStreams::new(seed).stream(index)
}

// SplitMix64 finalizer over the pair.
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform ±1 steps drawn 64 at a time from the bits of `next_u64`.
pub struct CoinFlips<'a, R: RngCore> {
    rng: &'a mut R,
    word: u64,
    left: u32,
}

impl<'a, R: RngCore> CoinFlips<'a, R> {
    pub fn new(rng: &'a mut R) -> Self {
        Self {
            rng,
            word: 0,
            left: 0,
        }
    }
}

impl<R: RngCore> Iterator for CoinFlips<'_, R> {
    type Item = i8;

    #[inline]
    fn next(&mut self) -> Option<i8> {
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 64;
        }
        let bit = self.word & 1;
        self.word >>= 1;
        self.left -= 1;
        Some(if bit == 1 { 1 } else { -1 })
    }
}
