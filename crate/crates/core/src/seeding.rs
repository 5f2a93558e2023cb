//! Seed derivation and random draws shared by every generator.
//!
//! Every random object in the crate is produced from a 64-bit seed. Child
//! seeds are derived with a SplitMix64 finaliser over `(parent, stream, index)`
//! so that trial `i` of an experiment always sees the same stream no matter
//! how trials are scheduled across workers.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Stream tags for [`derive_seed`].
pub mod stream {
    pub const GEOMETRY: u64 = 0x6765_6f6d;
    pub const CHAOTIC_NOISE: u64 = 0x6e6f_6973;
    pub const PILOT: u64 = 0x7069_6c6f;
    pub const ENROLL: u64 = 0x656e_726f;
    pub const TRIAL: u64 = 0x7472_6961;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, stream: u64, index: u64) -> u64 {
    let a = mix64(parent.wrapping_add(GOLDEN));
    let b = mix64(a ^ stream.wrapping_mul(GOLDEN));
    mix64(b.wrapping_add(index.wrapping_mul(GOLDEN)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// One draw from CN(0, variance).
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}
