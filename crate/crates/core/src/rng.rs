//! Keyed random substreams.
//!
//! Every trial owns one ChaCha stream per [`StreamRole`]. The stream id is
//! derived from `(trial, role)` alone, so a trial sees the same numbers no
//! matter which thread runs it or in what order trials are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::C64;

/// What a substream is used for inside one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamRole {
    ChannelG = 0,
    ChannelH = 1,
    PhaseErrors = 2,
    AngleErrors = 3,
    TrueAngles = 4,
    Snapshots = 5,
    Drift = 6,
    Symbols = 7,
}

const ROLE_SLOTS: u64 = 16;

/// Independent generator for `(seed, trial, role)`.
pub fn substream(seed: u64, trial: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_mul(ROLE_SLOTS).wrapping_add(role as u64));
    rng
}

/// One circularly-symmetric complex Gaussian sample with unit variance.
pub fn cscg<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
