//! Physical-layer authentication with chaotic antenna-array signatures.
//!
//! A device ("Neo") is identified by the random vertex displacements of its
//! patch array, which perturb its spatial signature, and by a pseudorandom
//! pilot/activation pattern. The authenticator ("Seraph") correlates the
//! received frame with the expected signal, estimates the noise floor from
//! probes orthogonal to every enrolled signal, and compares the metric
//! against the larger of an equidistant and a false-alarm threshold.
//!
//! The [`montecarlo`] module reproduces missed-detection, noise-only false
//! authentication and intruder penetration curves.

pub mod channel;
pub mod detector;
pub mod error;
pub mod geometry;
pub mod hexfloat;
mod linalg;
pub mod montecarlo;
pub mod pilot;
pub mod registry;
pub mod seeding;
pub mod signature;
pub mod stats;

pub use error::{Error, Result};

/// Dense complex matrix, row-major.
pub type CMatrix = ndarray::Array2<num_complex::Complex64>;
