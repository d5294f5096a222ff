//! Reproducible random streams.
//!
//! Every random draw in a run is taken from a substream identified by
//! `(step, purpose, index)` under a master seed. A substream is a ChaCha8
//! generator keyed by a SplitMix64 hash of that triple, so draws do not depend
//! on the order in which substreams are consumed. This is what lets estimator
//! draws inside a step run in parallel and still give bit-identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What a substream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Proposal = 1,
    Accept = 2,
    EstimatorDraw = 3,
    Instance = 4,
    Validation = 5,
    Bench = 6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    seed: u64,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child tree, used to give independent chains or instances their own
    /// namespace.
    pub fn child(&self, label: u64) -> SeedTree {
        SeedTree {
            seed: splitmix64(self.seed ^ splitmix64(label.wrapping_add(0xA5A5_5A5A))),
        }
    }

    pub fn stream(&self, step: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut h = splitmix64(self.seed);
        for (chunk, word) in key
            .chunks_exact_mut(8)
            .zip([step, purpose as u64, index, 0x6469_6b69_6e00_0000])
        {
            h = splitmix64(h ^ word);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

pub fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
