//! Pseudorandom pilot and antenna-activation matrices.
//!
//! Entry `(m, t)` draws an activation variable `ν ~ U(0,1)`; the antenna
//! transmits in that baud iff `ν ≥ ν_n`. Active entries carry magnitude
//! `√U(0,1)` and phase `U(−π, π)`. All three draws are taken for every entry
//! regardless of activation, so two pilots with the same seed and different
//! thresholds share their magnitudes and phases.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hexfloat;
use crate::seeding::rng_from_seed;
use crate::CMatrix;

pub const DEFAULT_T_BAUDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotConfig {
    pub m_antennas: usize,
    pub t_bauds: usize,
    pub activation_threshold: f64,
    pub seed: u64,
}

impl PilotConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_antennas == 0 || self.t_bauds == 0 {
            return Err(invalid(format!(
                "pilot needs M >= 1 and T >= 1, got {}x{}",
                self.m_antennas, self.t_bauds
            )));
        }
        if !(0.0..=1.0).contains(&self.activation_threshold) {
            return Err(invalid(format!(
                "activation threshold {} outside [0, 1]",
                self.activation_threshold
            )));
        }
        Ok(())
    }
}

/// `M × T` pilot symbols with the matching activation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix {
    pub values: CMatrix,
    pub active_mask: Array2<bool>,
}

impl PilotMatrix {
    /// Checks shape agreement and the zero-iff-inactive rule.
    pub fn new(values: CMatrix, active_mask: Array2<bool>) -> Result<Self> {
        if values.dim() != active_mask.dim() {
            return Err(Error::DimensionMismatch(format!(
                "pilot values {:?} vs mask {:?}",
                values.dim(),
                active_mask.dim()
            )));
        }
        for (v, &on) in values.iter().zip(active_mask.iter()) {
            if (*v == Complex64::default()) == on {
                return Err(invalid("pilot entry must be zero exactly when inactive"));
            }
        }
        Ok(Self {
            values,
            active_mask,
        })
    }

    pub fn zeros(m: usize, t: usize) -> Self {
        Self {
            values: CMatrix::zeros((m, t)),
            active_mask: Array2::from_elem((m, t), false),
        }
    }

    pub fn antennas(&self) -> usize {
        self.values.nrows()
    }

    pub fn bauds(&self) -> usize {
        self.values.ncols()
    }
}

pub fn generate_pilot_matrix(cfg: &PilotConfig) -> Result<PilotMatrix> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    Ok(draw_pilot(
        cfg.m_antennas,
        cfg.t_bauds,
        cfg.activation_threshold,
        &mut rng,
    ))
}

pub(crate) fn draw_pilot<R: Rng + ?Sized>(
    m: usize,
    t: usize,
    threshold: f64,
    rng: &mut R,
) -> PilotMatrix {
    let mut values = CMatrix::zeros((m, t));
    let mut mask = Array2::from_elem((m, t), false);
    for (v, on) in values.iter_mut().zip(mask.iter_mut()) {
        let nu: f64 = rng.random();
        let mag = rng.random::<f64>().sqrt();
        let phase = rng.random_range(-PI..PI);
        // ν ≥ 0 always; a magnitude of exactly 0 would break zero-iff-inactive
        if nu >= threshold && mag > 0.0 {
            *v = Complex64::from_polar(mag, phase);
            *on = true;
        }
    }
    PilotMatrix {
        values,
        active_mask: mask,
    }
}

/// `Σ |X(m,t)|²`.
pub fn pilot_energy(x: &PilotMatrix) -> f64 {
    x.values.iter().map(|v| v.norm_sqr()).sum()
}

/// Number of transmitting antennas in each baud.
pub fn active_count_per_baud(x: &PilotMatrix) -> Vec<usize> {
    x.active_mask
        .columns()
        .into_iter()
        .map(|c| c.iter().filter(|&&on| on).count())
        .collect()
}

#[derive(Serialize, Deserialize)]
struct PilotDoc {
    rows: usize,
    cols: usize,
    /// Row-major `[re, im]` hex pairs.
    #[serde(with = "hexfloat::complex_vec")]
    values: Vec<Complex64>,
    /// Row-major activation flags.
    mask: Vec<bool>,
}

impl Serialize for PilotMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PilotDoc {
            rows: self.antennas(),
            cols: self.bauds(),
            values: self.values.iter().copied().collect(),
            mask: self.active_mask.iter().copied().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PilotMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = PilotDoc::deserialize(d)?;
        let values =
            CMatrix::from_shape_vec((doc.rows, doc.cols), doc.values).map_err(D::Error::custom)?;
        let mask =
            Array2::from_shape_vec((doc.rows, doc.cols), doc.mask).map_err(D::Error::custom)?;
        PilotMatrix::new(values, mask).map_err(D::Error::custom)
    }
}
