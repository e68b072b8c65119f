//! Counter-based hashing and a small stream generator.
//!
//! Environment cells are drawn by hashing `(seed, cell)` so any cell can be
//! evaluated in any order with identical results.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// The splitmix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of a seed and a sequence of signed integer coordinates.
pub fn hash_coords(seed: u64, coords: &[i64]) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    for &c in coords {
        h = mix64(h.wrapping_add(GOLDEN) ^ (c as u64).wrapping_mul(0xd6e8_feb8_6659_fd93));
    }
    h
}

/// Uniform on `[0, 1)` from the top 53 bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sequential splitmix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        (((self.next_u64() >> 32) * n as u64) >> 32) as usize
    }
}

/// Derives the `k`-th child seed of `seed` (for per-sample streams).
pub fn child_seed(seed: u64, k: u64) -> u64 {
    hash_coords(seed, &[k as i64, 0x5eed])
}
