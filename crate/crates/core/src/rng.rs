//! Seeded random substreams.
//!
//! Every random quantity in the simulator is drawn from ChaCha12 keyed by the
//! scenario seed. Operations use disjoint ChaCha stream ids built from
//! `(operation, trial)`, so adding or reordering operations never perturbs the
//! draws of another one.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

/// Operation ids used to separate substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Op {
    Soi = 1,
    Interference = 2,
    DetectorResponse = 3,
    DetectorSweep = 4,
    Angles = 5,
}

impl Seed {
    pub fn rng(self, op: Op, trial: u32) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.0);
        rng.set_stream(((op as u64) << 32) | trial as u64);
        rng
    }

    /// Seed for the `index`-th trial of a batch.
    pub fn for_trial(self, index: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(index.wrapping_add(1))))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal deviate addressed by `index` within a substream.
///
/// Uses Box-Muller on the two 64-bit words at that position, so the value
/// depends only on `(seed, op, trial, index)` and not on draw order.
pub fn normal_at(rng: &mut ChaCha12Rng, index: u64) -> f64 {
    rng.set_word_pos(index as u128 * 4);
    let u1 = unit_open(rng.next_u64());
    let u2 = unit_open(rng.next_u64());
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

// (0, 1]; never returns 0 so the log above is finite.
fn unit_open(word: u64) -> f64 {
    ((word >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}
