//! Counter-based random streams.
//!
//! Every random draw in the toolkit is addressed by a [`StreamKey`]: the master
//! seed, a [`Domain`] tag naming what the numbers are used for, and a trial
//! index. The key selects a ChaCha8 keystream (key derived from seed and
//! domain, stream id = trial), so any trial can be regenerated in isolation and
//! parallel schedules cannot change results.
//!
//! Complex Gaussians consume exactly two `u64` words each, which makes the
//! coefficient draw for index `k` live at keystream word `4k`.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::f64::consts::TAU;

/// Identifier written into output metadata.
pub const GENERATOR_ID: &str =
    "chacha8/rand_chacha-0.9; key=splitmix64(seed,domain); stream=trial; word=4*draw";

/// What a stream's numbers are used for. Distinct domains never share keystreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Coefficients,
    Sphere,
    SphereOuter,
    RootInit,
    OmegaConditioned,
    NormIntegral,
    Custom(u32),
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Coefficients => 1,
            Domain::Sphere => 2,
            Domain::SphereOuter => 3,
            Domain::RootInit => 4,
            Domain::OmegaConditioned => 5,
            Domain::NormIntegral => 6,
            Domain::Custom(x) => 0x1_0000_0000 | x as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub domain: Domain,
    pub trial: u64,
}

impl StreamKey {
    pub fn new(seed: u64, domain: Domain, trial: u64) -> Self {
        StreamKey { seed, domain, trial }
    }

    pub fn stream(self) -> RandomStream {
        RandomStream::new(self)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A positioned random stream. Cheap to create; not shared between threads.
#[derive(Debug, Clone)]
pub struct RandomStream {
    key: StreamKey,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(key: StreamKey) -> Self {
        let mut state = key.seed ^ key.domain.tag().wrapping_mul(0xD6E8_FEB8_6659_FD93);
        let mut bytes = [0u8; 32];
        for chunk in bytes.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(bytes);
        rng.set_stream(key.trial);
        RandomStream { key, rng }
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    /// Repositions the stream at draw `index` (each draw is two `u64` words).
    pub fn seek_draw(&mut self, index: u64) {
        self.rng.set_word_pos(4 * index as u128);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open_zero(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Standard complex Gaussian: `E|g|^2 = 1`, each component variance 1/2.
    ///
    /// Built from `|g|^2 ~ Exp(1)` and a uniform phase, so `P(|g| >= t) = exp(-t^2)` exactly.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let u = self.uniform_open_zero();
        let v = self.uniform();
        Complex64::from_polar((-u.ln()).sqrt(), TAU * v)
    }

    /// The `index`-th complex Gaussian of this stream, independent of stream position.
    pub fn complex_gaussian_at(&mut self, index: u64) -> Complex64 {
        self.seek_draw(index);
        self.complex_gaussian()
    }

    /// A point of `C^m` uniform on the sphere of radius `r`.
    pub fn sphere_point(&mut self, m: usize, r: f64) -> Vec<Complex64> {
        let mut g: Vec<Complex64> = (0..m).map(|_| self.complex_gaussian()).collect();
        let norm = g.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let scale = r / norm;
        for c in &mut g {
            *c *= scale;
        }
        g
    }
}
