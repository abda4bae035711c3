//! Seedable, portable random stream used for mismatch draws, read noise and data shuffling.
//!
//! Algorithm `chacha8-boxmuller-v1`:
//! * words come from ChaCha8 seeded with `ChaCha8Rng::seed_from_u64(seed)`;
//! * a uniform `f64` in `[0, 1)` is `(next_u64 >> 11) * 2^-53`;
//! * a standard normal consumes two uniforms `u1, u2` and returns
//!   `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)` (the sine branch is discarded);
//! * an index below `n` is `(next_u64 as u128 * n) >> 64`.
//!
//! The stream position (ChaCha word position) is part of saved state, so a reloaded
//! generator continues exactly where the original left off.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RNG_ALGORITHM: &str = "chacha8-boxmuller-v1";

#[derive(Debug, Clone)]
pub struct DeviceRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl PartialEq for DeviceRng {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.word_pos() == other.word_pos()
    }
}

impl DeviceRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Rebuilds a generator at a saved stream position.
    pub fn at_position(seed: u64, word_pos: u128) -> Self {
        let mut rng = Self::new(seed);
        rng.inner.set_word_pos(word_pos);
        rng
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle driven by [`DeviceRng::below`].
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = DeviceRng::new(7);
        let mut b = DeviceRng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn position_restores_stream() {
        let mut a = DeviceRng::new(42);
        for _ in 0..37 {
            a.standard_normal();
        }
        let mut b = DeviceRng::at_position(42, a.word_pos());
        assert_eq!(a, b);
        for _ in 0..10 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn normal_moments_are_plausible() {
        let mut rng = DeviceRng::new(1);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.standard_normal()).collect();
        let (m, s) = crate::numeric::mean_std(&xs);
        assert!(m.abs() < 0.03, "mean {m}");
        assert!((s - 1.0).abs() < 0.03, "std {s}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = DeviceRng::new(3);
        let mut xs: Vec<usize> = (0..50).collect();
        rng.shuffle(&mut xs);
        let mut sorted = xs.clone();
        sorted.sort();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(xs, sorted);
    }
}
