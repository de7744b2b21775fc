//! Deterministic seeded random numbers.
//!
//! PCG-XSH-RR with 64-bit state (O'Neill's `pcg32`), hand-rolled so that the
//! same seed yields the same stream on every platform. Normal variates come
//! from Box-Muller; each call consumes exactly two uniform draws, so streams
//! stay reproducible regardless of how callers interleave draws.

const PCG_MULT: u64 = 6364136223846793005;
const PCG_STREAM: u64 = 1442695040888963407;

/// Splittable-by-construction-only deterministic generator.
#[derive(Debug, Clone)]
pub struct SeededRng {
    state: u64,
    seed: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        let mut rng = SeededRng { state: 0, seed };
        rng.next_u32();
        rng.state = rng.state.wrapping_add(seed);
        rng.next_u32();
        rng
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u32(&mut self) -> u32 {
        let old = self.state;
        self.state = old.wrapping_mul(PCG_MULT).wrapping_add(PCG_STREAM);
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        xorshifted.rotate_right(rot)
    }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    pub fn uniform(&mut self) -> f64 {
        let hi = (self.next_u32() >> 5) as u64; // 27 bits
        let lo = (self.next_u32() >> 6) as u64; // 26 bits
        ((hi << 26) | lo) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// One standard-normal variate (Box-Muller, two uniform draws).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // in (0, 1], keeps ln finite
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
