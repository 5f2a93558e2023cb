//! Geometric multipath channel and the received-frame model `y = H·X + w`.
//!
//! The channel is a superposition of `L` rank-one paths,
//! `H = Σ_p g_p·√(N_s·M)·e_r(Ω_r,p)·e_tᴴ(Ω_t,p)`, where `e_r` is Seraph's
//! nominal planar response, `e_t` the transmitter's (possibly chaotic)
//! response and `g_p ~ CN(0, σ_h²/L)`. With unit-norm responses every entry
//! of `H` then has mean power `σ_h²`, so `E‖H‖_F² = σ_h²·N_s·M`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hexfloat;
use crate::pilot::{pilot_energy, PilotMatrix};
use crate::seeding::{complex_gaussian, rng_from_seed};
use crate::signature::{ArrayResponse, Direction, PlanarArray, SignatureKind};
use crate::CMatrix;

pub const DEFAULT_PATH_COUNT: usize = 32;
pub const DEFAULT_N_SERAPH: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub n_seraph: usize,
    pub path_count: usize,
    pub sigma_h: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_seraph == 0 || self.path_count == 0 {
            return Err(invalid("channel needs N_s >= 1 and L >= 1"));
        }
        if !(self.sigma_h > 0.0 && self.sigma_h.is_finite()) {
            return Err(invalid(format!(
                "sigma_h must be positive, got {}",
                self.sigma_h
            )));
        }
        Ok(())
    }

    /// Seraph's array: the most square factorisation of `n_seraph`.
    pub fn seraph_array(&self) -> Result<PlanarArray> {
        PlanarArray::most_square(self.n_seraph)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    #[serde(with = "complex_pair")]
    pub gain: Complex64,
    pub tx_dir: Direction,
    pub rx_dir: Direction,
}

mod complex_pair {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
        hexfloat::encode_complex(*z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Complex64, D::Error> {
        use serde::de::Error as _;
        let pair = <[String; 2]>::deserialize(d)?;
        hexfloat::decode_complex(&pair).map_err(D::Error::custom)
    }
}

/// Draws `L` paths with uniform directions at both ends and
/// `CN(0, σ_h²/L)` gains.
pub fn draw_paths<R: Rng + ?Sized>(path_count: usize, sigma_h: f64, rng: &mut R) -> Vec<Path> {
    let var = sigma_h * sigma_h / path_count as f64;
    (0..path_count)
        .map(|_| {
            let tx_dir = Direction::random(rng);
            let rx_dir = Direction::random(rng);
            let gain = complex_gaussian(rng, var);
            Path {
                gain,
                tx_dir,
                rx_dir,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    #[serde(with = "hexfloat::cmatrix")]
    pub matrix: CMatrix,
    pub paths: Vec<Path>,
    pub tx_unit_signature_kind: SignatureKind,
    pub sigma_h: f64,
    pub seraph: PlanarArray,
}

impl ChannelRealization {
    /// Sums the rank-one path terms for the given transmitter.
    pub fn from_paths(
        paths: Vec<Path>,
        sigma_h: f64,
        seraph: PlanarArray,
        tx: &dyn ArrayResponse,
    ) -> Self {
        let matrix = sum_paths(&paths, &seraph, tx);
        Self {
            matrix,
            paths,
            tx_unit_signature_kind: tx.kind(),
            sigma_h,
            seraph,
        }
    }

    pub fn n_seraph(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn m_antennas(&self) -> usize {
        self.matrix.ncols()
    }

    /// Re-sums the stored paths; equals `matrix` up to rounding when `tx` is
    /// the transmitter the realization was built for.
    pub fn reconstruct(&self, tx: &dyn ArrayResponse) -> CMatrix {
        sum_paths(&self.paths, &self.seraph, tx)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn sum_paths(paths: &[Path], seraph: &PlanarArray, tx: &dyn ArrayResponse) -> CMatrix {
    let n = seraph.element_count();
    let m = tx.element_count();
    let scale = ((n * m) as f64).sqrt();
    let mut h = CMatrix::zeros((n, m));
    let mut er = vec![Complex64::default(); n];
    let mut et = vec![Complex64::default(); m];
    for p in paths {
        seraph.response_into(p.rx_dir, &mut er);
        tx.response_into(p.tx_dir, &mut et);
        let g = p.gain * scale;
        for (i, mut row) in h.rows_mut().into_iter().enumerate() {
            let a = g * er[i];
            for (hij, ej) in row.iter_mut().zip(&et) {
                *hij += a * ej.conj();
            }
        }
    }
    h
}

/// One channel draw towards the transmitter `tx`, seeded by `cfg.seed`.
pub fn generate_scattering_channel(
    cfg: &ChannelConfig,
    tx: &dyn ArrayResponse,
) -> Result<ChannelRealization> {
    cfg.validate()?;
    let seraph = cfg.seraph_array()?;
    let mut rng = rng_from_seed(cfg.seed);
    let paths = draw_paths(cfg.path_count, cfg.sigma_h, &mut rng);
    Ok(ChannelRealization::from_paths(
        paths,
        cfg.sigma_h,
        seraph,
        tx,
    ))
}

/// `γ = 10^(snr_db/20)`; `snr_db = 10·log10(σ_h²/σ_w²)` under
/// [`SnrReference::PerSample`].
pub fn snr_db_to_gamma(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 20.0)
}

pub fn gamma_to_snr_db(gamma: f64) -> f64 {
    20.0 * gamma.log10()
}

/// What the SNR axis measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrReference {
    /// `σ_w² = (σ_h/γ)²`: channel power per entry over noise power per sample.
    PerSample,
    /// `σ_w² = σ_h²·N_s·‖X‖_F²/γ²`: expected received frame energy over noise
    /// power per sample, i.e. the SNR after coherent combining.
    #[default]
    FrameEnergy,
}

/// Noise power per received sample. `+∞` dB gives zero.
pub fn noise_variance(
    snr_db: f64,
    sigma_h: f64,
    reference: SnrReference,
    n_seraph: usize,
    pilot_energy: f64,
) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    let g = snr_db_to_gamma(snr_db);
    let per_sample = (sigma_h / g).powi(2);
    match reference {
        SnrReference::PerSample => per_sample,
        SnrReference::FrameEnergy => per_sample * n_seraph as f64 * pilot_energy,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    pub samples: CMatrix,
    pub true_noise_variance: f64,
    pub snr_db: f64,
}

/// `y = H·X + w` with `w` i.i.d. `CN(0, σ_w²)`.
pub fn transmit<R: Rng + ?Sized>(
    h: &ChannelRealization,
    x: &PilotMatrix,
    snr_db: f64,
    reference: SnrReference,
    rng: &mut R,
) -> Result<ReceivedFrame> {
    let var = noise_variance(snr_db, h.sigma_h, reference, h.n_seraph(), pilot_energy(x));
    Ok(ReceivedFrame {
        samples: received_samples(&h.matrix, x, var, rng)?,
        true_noise_variance: var,
        snr_db,
    })
}

/// `H·X` plus `CN(0, noise_variance)` noise; no noise is drawn at variance 0.
pub fn received_samples<R: Rng + ?Sized>(
    h: &CMatrix,
    x: &PilotMatrix,
    noise_variance: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    if h.ncols() != x.antennas() {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} transmit columns, pilot has {} antennas",
            h.ncols(),
            x.antennas()
        )));
    }
    let mut samples = h.dot(&x.values);
    if noise_variance > 0.0 {
        samples
            .iter_mut()
            .for_each(|y| *y += complex_gaussian(rng, noise_variance));
    }
    Ok(samples)
}
