//! Deterministic random streams.
//!
//! `Rng` is xoshiro256** seeded through SplitMix64. Child streams come from
//! [`Rng::split`], which hashes the parent's seed material together with a
//! split index; a parent and its children never share state.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 step: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    mix64(*state)
}

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th child of `master`. Distinct indices always give
/// distinct seeds because every step is a bijection in `index`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(mix64(index.wrapping_add(GOLDEN))))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    s: [u64; 4],
    seed: u64,
    spare: Option<u64>,
}

impl Rng {
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = seed;
        let mut s = [0u64; 4];
        for w in &mut s {
            *w = splitmix64(&mut sm);
        }
        // xoshiro must not start from the all-zero state; SplitMix64 output
        // of four consecutive steps cannot be all zero, but keep the guard.
        if s == [0; 4] {
            s[0] = GOLDEN;
        }
        Rng {
            s,
            seed,
            spare: None,
        }
    }

    /// The seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream number `index`, seeded with
    /// `derive_seed(self.seed(), index)`. Does not advance `self`.
    pub fn split(&self, index: u64) -> Rng {
        Rng::seed_from_u64(derive_seed(self.seed, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`; never returns zero.
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        // Lemire's multiply-shift; the bias is < 2^-64 * n and irrelevant here.
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Log-uniform sample in `[lo, hi]`, both positive. A degenerate range
    /// `lo == hi` returns `lo` (zero included) and still consumes one draw.
    pub fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            self.next_u64();
            return lo;
        }
        (lo.ln() + (hi.ln() - lo.ln()) * self.uniform()).exp()
    }

    /// Standard normal deviate (Box-Muller). Each pair of outputs consumes
    /// exactly two uniforms; the second deviate of a pair is cached.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(bits) = self.spare.take() {
            return f64::from_bits(bits);
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some((r * theta.sin()).to_bits());
        r * theta.cos()
    }

    pub fn gaussian_f32(&mut self) -> f32 {
        self.gaussian() as f32
    }
}

/// Standard normal `f32` from `rng`.
pub fn rng_gaussian(rng: &mut Rng) -> f32 {
    rng.gaussian_f32()
}
