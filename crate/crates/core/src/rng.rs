//! Counter-based splittable random number generator.
//!
//! Each (seed, stream_id) pair yields an independent, reproducible stream:
//! output n is a stateless hash of (key, n), where the key mixes seed and
//! stream id. Replicates can therefore run in parallel and in any order with
//! bit-identical results. The mixing function is the 64-bit finalizer from
//! SplitMix64 applied to a Weyl sequence with the golden-ratio increment; the
//! bitstream is frozen by golden-value tests.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
    key: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let key = mix64(seed ^ mix64(stream_id.wrapping_mul(GOLDEN) ^ 0x5851_F42D_4C95_7F2D));
        RngStream { seed, stream_id, key, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter += 1;
        v
    }

    /// Uniform on the open interval (0, 1); never returns 0 or 1, so logs are
    /// always finite.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Exponential with the given rate (> 0).
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        debug_assert!(rate > 0.0);
        -self.uniform().ln() / rate
    }

    /// Unit exponential, as in the jump-time step of the hybrid simulator.
    #[inline]
    pub fn unit_exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }
}
