//! Seeded randomness shared by degradation generation and the oracle suites.
//!
//! Everything runs on PCG32 (`Lcg64Xsh32`), so a seed reproduces the same
//! stream on every platform.

use rand::RngExt;
use rand_pcg::Pcg32;

/// Stream selectors keep masks, noise and test instances independent for one seed.
pub const STREAM_MASK: u64 = 0x6d61_736b;
pub const STREAM_NOISE: u64 = 0x6e6f_6973;
pub const STREAM_VERIFY: u64 = 0x7665_7269;

pub fn pcg(seed: u64, stream: u64) -> Pcg32 {
    Pcg32::new(seed, stream)
}

/// Standard normal deviates by the Box–Muller transform.
#[derive(Debug, Clone)]
pub struct Gaussian {
    rng: Pcg32,
    spare: Option<f64>,
}

impl Gaussian {
    pub fn new(seed: u64, stream: u64) -> Self {
        Gaussian {
            rng: pcg(seed, stream),
            spare: None,
        }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 − U lies in (0, 1], keeping the logarithm finite.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn rng(&mut self) -> &mut Pcg32 {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn pcg32_reference_stream() {
        // Published output of the PCG reference demo (state 42, sequence 54).
        let mut rng = pcg(42, 54);
        let expected = [0xa15c02b7u32, 0x7b47f409, 0xba1d3330, 0x83d2f293, 0xbfa4784b, 0xcbed606e];
        for e in expected {
            assert_eq!(rng.next_u32(), e);
        }
    }

    #[test]
    fn gaussian_is_reproducible() {
        let mut a = Gaussian::new(7, STREAM_NOISE);
        let mut b = Gaussian::new(7, STREAM_NOISE);
        for _ in 0..100 {
            assert_eq!(a.sample().to_bits(), b.sample().to_bits());
        }
    }
}
