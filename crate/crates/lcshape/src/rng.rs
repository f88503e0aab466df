//! Counter-based pseudo-random numbers for reproducible fixtures and restarts.
//!
//! SplitMix64 advances a 64-bit counter by a fixed increment and hashes it,
//! so streams are seedable, cheap to fork, and independent of evaluation
//! order. All stochastic components of the crate (fit restarts, synthetic
//! noise) draw from this generator rather than a platform RNG.

use std::f64::consts::TAU;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Finalizer from the SplitMix64 reference implementation.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    spare_gaussian: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            spare_gaussian: None,
        }
    }

    /// A generator whose stream is a pure function of `(seed, a, b)`.
    ///
    /// Used to key noise draws by position so generated data do not depend
    /// on the order in which cells are filled.
    pub fn keyed(seed: u64, a: u64, b: u64) -> Self {
        let k = mix(seed ^ mix(a.wrapping_mul(GOLDEN_GAMMA) ^ b.rotate_left(32)));
        Self::new(k)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Log-uniform in `[lo, hi)`, both positive.
    pub fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        (self.uniform(lo.ln(), hi.ln())).exp()
    }

    /// Standard normal via Box-Muller; the paired draw is cached.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare_gaussian.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        self.spare_gaussian = Some(r * (TAU * u2).sin());
        r * (TAU * u2).cos()
    }
}
