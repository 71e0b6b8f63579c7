//! Seeded Gaussian noise.
//!
//! Uniform draws come from ChaCha8 (`rand_chacha`), a counter-based stream
//! cipher generator with a published specification. Pairs of uniforms
//! `u1 ∈ (0, 1]`, `u2 ∈ [0, 1)` built from the top 53 bits of consecutive
//! 64-bit outputs are mapped to two standard normals by Box–Muller:
//! `√(−2 ln u1)·cos(2π u2)` then `√(−2 ln u1)·sin(2π u2)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream { rng: ChaCha8Rng::seed_from_u64(seed), spare: None }
    }

    fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn next_normal(&mut self, sigma: f64) -> f64 {
        sigma * self.next_standard()
    }
}
