//! Counter-based SplitMix64 streams. Every random bit in the crate is a pure
//! function of a seed and an index, so replicates are reproducible in any order.

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in [0, 1) with 53 bits of resolution, keyed by `(seed, index)`.
#[inline]
pub fn keyed_uniform(seed: u64, index: u64) -> f64 {
    let z = mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)));
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Child seed for the `index`-th member of the stream named `stream`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(stream) ^ mix64(index.wrapping_add(GOLDEN_GAMMA)))
}

/// Sequential generator over the keyed stream, for resampling and synthetic data.
#[derive(Clone, Debug)]
pub struct SplitMix {
    seed: u64,
    counter: u64,
}

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix { seed, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let z = mix64(self.seed.wrapping_add(self.counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)));
        self.counter += 1;
        z
    }

    pub fn next_f64(&mut self) -> f64 {
        let u = keyed_uniform(self.seed, self.counter);
        self.counter += 1;
        u
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}
