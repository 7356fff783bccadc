//! Deterministic random generation.
//!
//! The generator is xoshiro256++ seeded through SplitMix64, so an identical
//! seed yields an identical stream of draws on every platform and run. All
//! stochastic code in this crate draws from this generator; nothing touches
//! OS entropy.

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded deterministic PRNG (xoshiro256++ core).
///
/// One instance per logical experiment thread; instances are cheap to
/// derive and must not be shared across concurrent callers.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    state: [u64; 4],
}

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = seed;
        let state = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Self { seed, state }
    }

    /// The seed this generator was constructed with (not the live state).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent child generator keyed by `stream`.
    ///
    /// Children depend only on the construction seed, so derivation order
    /// and interleaving with draws do not affect them.
    pub fn derive(&self, stream: u64) -> Rng {
        let mut sm = self.seed ^ stream.wrapping_mul(GOLDEN);
        Rng::from_seed(splitmix64(&mut sm))
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Unbiased integer draw in `[0, n)` by rejection sampling.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// One N(mu, sigma^2) draw via the Box-Muller transform.
    ///
    /// Always consumes exactly two uniforms and uses the cosine branch, so
    /// the stream position is a pure function of the call count.
    pub fn gaussian(&mut self, mu: f64, sigma: f64) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]: keeps ln finite
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        mu + sigma * r * (std::f64::consts::TAU * u2).cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }

    /// `k` distinct indices drawn from `0..n` (partial Fisher-Yates),
    /// returned in selection order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "sample_indices: k > n");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

/// `count` i.i.d. draws from N(mu, sigma^2); `sigma == 0` degenerates to
/// a constant vector of `mu`.
pub fn gaussian(rng: &mut Rng, mu: f64, sigma: f64, count: usize) -> Result<Vec<f64>> {
    if sigma < 0.0 {
        return Err(Error::InvalidConfig(format!("negative sigma {sigma}")));
    }
    Ok((0..count).map(|_| rng.gaussian(mu, sigma)).collect())
}
