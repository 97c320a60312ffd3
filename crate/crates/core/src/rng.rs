//! Random streams used by the mechanisms.
//!
//! Every sampler draws through [`NoiseSource`] so tests can substitute
//! [`ZeroNoise`], a stream whose Laplace and Gaussian draws are exactly zero.
//! Production streams are [`ChaCha8Rng`] seeded with [`seeded`], which is
//! reproducible across platforms.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use rand_chacha::ChaCha8Rng as StreamRng;

pub trait NoiseSource {
    /// Uniform draw on the open interval (0, 1).
    fn uniform_open(&mut self) -> f64;

    /// Standard normal draw.
    fn standard_normal(&mut self) -> f64;
}

impl<R: RngCore> NoiseSource for R {
    fn uniform_open(&mut self) -> f64 {
        self.sample(Open01)
    }

    fn standard_normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }
}

/// Stub stream: uniform draws sit at the median and normal draws are zero,
/// so every mechanism returns its exact input.
#[derive(Debug, Default, Clone, Copy)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn uniform_open(&mut self) -> f64 {
        0.5
    }

    fn standard_normal(&mut self) -> f64 {
        0.0
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed mixer. The result depends only on the inputs, never on the
/// process, the platform or the std hasher.
#[derive(Debug, Clone, Copy)]
pub struct SeedMixer(u64);

impl SeedMixer {
    pub fn new(master: u64) -> Self {
        SeedMixer(splitmix64(master))
    }

    pub fn mix_u64(self, value: u64) -> Self {
        SeedMixer(splitmix64(self.0 ^ splitmix64(value)))
    }

    pub fn mix_str(self, value: &str) -> Self {
        // FNV-1a over the bytes, then fold in.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in value.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        self.mix_u64(h)
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_neutral() {
        let mut z = ZeroNoise;
        assert_eq!(z.uniform_open(), 0.5);
        assert_eq!(z.standard_normal(), 0.0);
    }

    #[test]
    fn uniform_is_open() {
        let mut r = seeded(1);
        for _ in 0..10_000 {
            let u = r.uniform_open();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn mixer_is_stable_and_order_sensitive() {
        let a = SeedMixer::new(7).mix_str("count:age").mix_u64(1).mix_u64(2).finish();
        let b = SeedMixer::new(7).mix_str("count:age").mix_u64(1).mix_u64(2).finish();
        let c = SeedMixer::new(7).mix_str("count:age").mix_u64(2).mix_u64(1).finish();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // Frozen value: guards against accidental changes to the derivation.
        assert_eq!(SeedMixer::new(0).finish(), 0xE220_A839_7B1D_CDAF);
    }
}
