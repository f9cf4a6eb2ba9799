//! Seed derivation and random streams.
//!
//! Every replicate draws from its own ChaCha20 stream. A replicate seed is
//! derived from the master seed and the replicate index with the SplitMix64
//! finalizer, and within one replicate separate purposes (strip, probes,
//! samplers, ...) use distinct ChaCha stream ids. Results therefore depend on
//! the replicate index only, never on which thread ran it.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Recorded in every experiment report.
pub const PRNG_NAME: &str = "ChaCha20Rng (rand_chacha 0.9) / SplitMix64 seed split / stream-per-purpose";

/// Independent stream ids used within one replicate seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Strip = 0,
    Probe = 1,
    Sampler = 2,
    Model = 3,
    Path = 4,
    Selector = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `stream_i = split(master_seed, i)`.
pub fn split(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn stream(seed: u64, purpose: Purpose) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// Uniform draw on the open interval (0,1).
///
/// Values are odd multiples of 2^-53, so they are never 0 or 1 and their binary
/// expansion does not terminate before digit 53.
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Exp(1) by inverse CDF, `-ln(1 - V)`.
#[inline]
pub fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -(1.0 - open01(rng)).ln()
}
