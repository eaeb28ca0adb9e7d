//! Seeded, splittable randomness.
//!
//! Every random object in the crate is drawn from a ChaCha20 stream keyed by
//! the user seed. Independent objects (retry attempts, individual matrices)
//! select distinct ChaCha stream ids, so a draw never depends on how many
//! numbers an unrelated object consumed.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Stream index reserved for projection matrices.
pub const PROJECTION_INDEX: u64 = 0;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stream id for `(attempt, index)`.
pub fn stream_id(attempt: u64, index: u64) -> u64 {
    splitmix64(splitmix64(attempt) ^ index.rotate_left(32))
}

/// Standard-normal sampler using the Marsaglia polar method.
#[derive(Clone, Debug)]
pub struct Gaussian {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl Gaussian {
    /// Sub-stream `(attempt, index)` under `seed`.
    pub fn stream(seed: u64, attempt: u64, index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id(attempt, index));
        Self { rng, spare: None }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.rng.gen::<f64>() - 1.0;
            let v = 2.0 * self.rng.gen::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    /// `S + iT` with `S, T` independent standard normals.
    pub fn complex_normal(&mut self) -> Complex64 {
        let re = self.standard_normal();
        let im = self.standard_normal();
        Complex64::new(re, im)
    }
}
