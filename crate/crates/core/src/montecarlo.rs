//! Rate-versus-SNR experiments: missed detection of the enrolled device,
//! false authentication of pure noise, and penetration by an intruder with
//! its own random signature and pilot.
//!
//! Trial `i` draws everything from `derive_seed(master_seed, TRIAL, i)`:
//! fresh multipath channels for every enrolled device, the intruder's
//! identity when there is one, the probe positions and a unit-variance noise
//! realisation. The same draws are reused at every grid SNR with the noise
//! scaled to the target level, so all points of a curve share their trials
//! and the curve is smooth across SNR. Counts are summed over fixed-size
//! chunks of trial indices and merged in index order, which makes results
//! independent of the worker count.
//!
//! Two engines evaluate a trial:
//!
//! * [`Engine::FullFrame`] forms `H`, `y = H·X + w` and calls
//!   [`authenticate`](crate::detector::authenticate). Cost is dominated by
//!   `H·X` (`N_s·M·T` multiply-adds).
//! * [`Engine::Compressed`] never forms a frame. Each expected signal is
//!   `s = A·B` with `A = [g_p·√(N_s·M)·e_r(Ω_r,p)]` and `B = E_tᴴ·X`
//!   (`L × T`), so Gram entries follow from `L × L` products and inner
//!   products of receive responses, which factor over Seraph's two array
//!   axes (`N_h + N_v` terms instead of `N_s`). Samples at the `K` probe
//!   positions cost `K·L` each. Noise enters through its `K` probe samples
//!   and its projections onto the signals, which are drawn from their exact
//!   conditional law given those samples. The statistics the detector sees
//!   have the same joint distribution as under the full-frame engine.

use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::path::Path as FsPath;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    draw_paths, noise_variance, ChannelRealization, Path, ReceivedFrame, SnrReference,
    DEFAULT_N_SERAPH, DEFAULT_PATH_COUNT,
};
use crate::detector::{
    authenticate, authenticate_statistics, draw_probe_positions, ChannelMap, DetectionResult,
    DetectorConfig, FrameStatistics, ProbeKind, ProbedSubspace, DEFAULT_PROBE_COUNT,
};
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::pilot::{draw_pilot, pilot_energy, PilotMatrix, DEFAULT_T_BAUDS};
use crate::registry::{write_atomic, DeviceProfile, Registry};
use crate::seeding::{complex_gaussian, derive_seed, rng_from_seed, stream, SimRng};
use crate::signature::{ArrayResponse, ChaoticArray, ChaoticNoise, PlanarArray, HALF_WAVELENGTH};
use crate::stats::{q_inverse, wilson_interval};
use crate::CMatrix;

/// Id of the device under test in experiment allowlists.
pub const NEO_ID: &str = "neo";
pub const MIN_TRIALS: u64 = 100;
/// Confidence level of the per-point Wilson intervals.
pub const CI_LEVEL: f64 = 0.95;
const CHUNK: u64 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// The enrolled device transmits; the event is a rejection.
    #[default]
    Miss,
    /// Only noise arrives; the event is an acceptance.
    FaNoise,
    /// A device with an independent signature and pilot transmits over the
    /// enrolled device's channel; the event is an acceptance.
    Intruder,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Miss => "miss",
            Scenario::FaNoise => "fa_noise",
            Scenario::Intruder => "intruder",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "miss" => Ok(Scenario::Miss),
            "fa_noise" | "fa-noise" => Ok(Scenario::FaNoise),
            "intruder" => Ok(Scenario::Intruder),
            other => Err(invalid(format!(
                "unknown scenario `{other}` (miss, fa_noise, intruder)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Compressed,
    FullFrame,
}

/// `-10, -9, …, 20` dB.
pub fn default_snr_grid() -> Vec<f64> {
    (-10..=20).map(f64::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub snr_grid_db: Vec<f64>,
    /// Antennas of the enrolled device, laid out as the most square grid.
    pub m_active: usize,
    pub n_seraph: usize,
    pub pfa_target: f64,
    pub trials_per_point: u64,
    pub master_seed: u64,
    pub t_bauds: usize,
    pub path_count: usize,
    /// Size of the allowlist; the device under test is one of them.
    pub enrolled_count: usize,
    pub activation_threshold: f64,
    pub sigma_h: f64,
    pub probe_count: usize,
    pub snr_reference: SnrReference,
    pub engine: Engine,
    /// Intruder reuses the enrolled device's `h̃` and pilot.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub clone_intruder: bool,
    /// Replaces `σ̂²` in the detector; see [`DetectorConfig`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_noise_variance: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Miss,
            snr_grid_db: default_snr_grid(),
            m_active: 16,
            n_seraph: DEFAULT_N_SERAPH,
            pfa_target: 0.01,
            trials_per_point: 10_000,
            master_seed: 0,
            t_bauds: DEFAULT_T_BAUDS,
            path_count: DEFAULT_PATH_COUNT,
            enrolled_count: 1,
            activation_threshold: 0.0,
            sigma_h: 1.0,
            probe_count: DEFAULT_PROBE_COUNT,
            snr_reference: SnrReference::FrameEnergy,
            engine: Engine::Compressed,
            clone_intruder: false,
            fixed_noise_variance: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_point < MIN_TRIALS {
            return Err(invalid(format!(
                "trials per point {} below minimum {MIN_TRIALS}",
                self.trials_per_point
            )));
        }
        if self.snr_grid_db.is_empty() {
            return Err(invalid("SNR grid is empty"));
        }
        if self
            .snr_grid_db
            .iter()
            .any(|s| s.is_nan() || *s == f64::NEG_INFINITY)
        {
            return Err(invalid("SNR grid entries must be numbers above -inf"));
        }
        if self.m_active == 0 || self.n_seraph == 0 || self.t_bauds == 0 || self.path_count == 0 {
            return Err(invalid(
                "array sizes, bauds and path count must be positive",
            ));
        }
        if self.enrolled_count == 0 {
            return Err(invalid(
                "the allowlist must hold at least the device under test",
            ));
        }
        if !(self.sigma_h > 0.0 && self.sigma_h.is_finite()) {
            return Err(invalid(format!(
                "sigma_h must be positive, got {}",
                self.sigma_h
            )));
        }
        if !(0.0..=1.0).contains(&self.activation_threshold) {
            return Err(invalid(format!(
                "activation threshold {} outside [0, 1]",
                self.activation_threshold
            )));
        }
        self.detector().validate()?;
        let dims = self.n_seraph * self.t_bauds;
        if self.probe_count + self.enrolled_count > dims {
            return Err(Error::InsufficientDimensions {
                probes: self.probe_count,
                rank: self.enrolled_count,
                frame_dims: dims,
            });
        }
        Ok(())
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            pfa_target: self.pfa_target,
            probe_count: self.probe_count,
            probe_kind: ProbeKind::Canonical,
            fixed_noise_variance: self.fixed_noise_variance,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// SNR at which `ψ_e = ψ_FA` for a frame whose energy equals its expected
/// value, under [`SnrReference::FrameEnergy`]: `10·log10(2·Q⁻¹(p_FA)²)`.
/// Below it the false-alarm threshold governs and the noise-only rate sits
/// at `p_FA`; above it the equidistant threshold takes over.
pub fn nominal_crossover_db(pfa: f64) -> Result<f64> {
    let q = q_inverse(pfa)?;
    Ok(10.0 * (2.0 * q * q).log10())
}

/// Per-grid-point outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    /// Rejection for [`Scenario::Miss`], acceptance otherwise.
    pub event: bool,
    pub exceeds_psi_fa: bool,
    pub exceeds_psi_e: bool,
    /// `σ̂²/σ_w²`, absent for noiseless frames.
    pub noise_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointTally {
    pub trials: u64,
    pub events: u64,
    pub psi_fa_exceedances: u64,
    pub psi_e_exceedances: u64,
    pub noise_ratio_count: u64,
    pub noise_ratio_sum: f64,
    pub noise_ratio_sq_sum: f64,
}

impl PointTally {
    pub fn add(&mut self, o: &Outcome) {
        self.trials += 1;
        self.events += u64::from(o.event);
        self.psi_fa_exceedances += u64::from(o.exceeds_psi_fa);
        self.psi_e_exceedances += u64::from(o.exceeds_psi_e);
        if let Some(r) = o.noise_ratio {
            self.noise_ratio_count += 1;
            self.noise_ratio_sum += r;
            self.noise_ratio_sq_sum += r * r;
        }
    }

    pub fn merge(&mut self, other: &PointTally) {
        self.trials += other.trials;
        self.events += other.events;
        self.psi_fa_exceedances += other.psi_fa_exceedances;
        self.psi_e_exceedances += other.psi_e_exceedances;
        self.noise_ratio_count += other.noise_ratio_count;
        self.noise_ratio_sum += other.noise_ratio_sum;
        self.noise_ratio_sq_sum += other.noise_ratio_sq_sum;
    }

    pub fn rate(&self) -> f64 {
        self.events as f64 / self.trials as f64
    }

    pub fn noise_ratio_mean(&self) -> Option<f64> {
        (self.noise_ratio_count > 0).then(|| self.noise_ratio_sum / self.noise_ratio_count as f64)
    }

    /// Standard error of [`noise_ratio_mean`](Self::noise_ratio_mean).
    pub fn noise_ratio_se(&self) -> Option<f64> {
        let n = self.noise_ratio_count as f64;
        let mean = self.noise_ratio_mean()?;
        let var = (self.noise_ratio_sq_sum / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        Some((var / n).sqrt())
    }
}

/// Counts for every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub points: Vec<PointTally>,
}

impl Tally {
    pub fn new(grid_len: usize) -> Self {
        Self {
            points: vec![PointTally::default(); grid_len],
        }
    }

    fn add(&mut self, outcomes: &[Outcome]) {
        for (p, o) in self.points.iter_mut().zip(outcomes) {
            p.add(o);
        }
    }

    pub fn merge(&mut self, other: &Tally) -> Result<()> {
        if self.points.len() != other.points.len() {
            return Err(Error::DimensionMismatch(format!(
                "tallies over {} and {} grid points",
                self.points.len(),
                other.points.len()
            )));
        }
        for (a, b) in self.points.iter_mut().zip(&other.points) {
            a.merge(b);
        }
        Ok(())
    }
}

/// The enrolled devices and everything fixed across trials.
pub struct Experiment {
    cfg: ExperimentConfig,
    registry: Registry,
    /// Allowlist in id order.
    arrays: Vec<ChaoticArray>,
    pilots: Vec<PilotMatrix>,
    target: usize,
    layout: PlanarArray,
    seraph: PlanarArray,
    detector: DetectorConfig,
}

/// Allowlist entry `i` of an experiment: the device under test first, then
/// peers.
pub fn experiment_device_id(i: usize) -> String {
    if i == 0 {
        NEO_ID.to_owned()
    } else {
        format!("peer-{i:02}")
    }
}

/// Randomness of one trial that both engines share.
struct TrialDraws {
    paths: Vec<Vec<Path>>,
    intruder: Option<(ChaoticArray, PilotMatrix)>,
    rng: SimRng,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = PlanarArray::most_square(cfg.m_active)?;
        let seraph = PlanarArray::most_square(cfg.n_seraph)?;
        let mut registry = Registry::new();
        for i in 0..cfg.enrolled_count {
            registry.enroll(DeviceProfile::generate(
                experiment_device_id(i),
                layout.h_count,
                layout.v_count,
                cfg.t_bauds,
                cfg.activation_threshold,
                derive_seed(cfg.master_seed, stream::ENROLL, i as u64),
                0,
            )?)?;
        }
        let arrays = registry
            .devices()
            .map(DeviceProfile::array)
            .collect::<Result<Vec<_>>>()?;
        let pilots = registry.devices().map(|p| p.pilot.clone()).collect();
        let target = registry
            .ids()
            .position(|id| id == NEO_ID)
            .expect("device under test is enrolled");
        let detector = cfg.detector();
        Ok(Self {
            cfg,
            registry,
            arrays,
            pilots,
            target,
            layout,
            seraph,
            detector,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    fn draw_trial(&self, index: u64) -> TrialDraws {
        let mut rng = rng_from_seed(derive_seed(self.cfg.master_seed, stream::TRIAL, index));
        let paths = (0..self.arrays.len())
            .map(|_| draw_paths(self.cfg.path_count, self.cfg.sigma_h, &mut rng))
            .collect();
        let intruder = (self.cfg.scenario == Scenario::Intruder).then(|| {
            if self.cfg.clone_intruder {
                (
                    self.arrays[self.target].clone(),
                    self.pilots[self.target].clone(),
                )
            } else {
                let m = self.layout.element_count();
                let noise = ChaoticNoise::draw(m, index, &mut rng);
                let pilot =
                    draw_pilot(m, self.cfg.t_bauds, self.cfg.activation_threshold, &mut rng);
                let array =
                    ChaoticArray::new(self.layout, &noise).expect("intruder matches the layout");
                (array, pilot)
            }
        });
        TrialDraws {
            paths,
            intruder,
            rng,
        }
    }

    /// Per-sample noise power at each grid point.
    fn noise_levels(&self, draws: &TrialDraws) -> Vec<f64> {
        let energy = match &draws.intruder {
            Some((_, x)) => pilot_energy(x),
            None => pilot_energy(&self.pilots[self.target]),
        };
        self.cfg
            .snr_grid_db
            .iter()
            .map(|&snr| {
                noise_variance(
                    snr,
                    self.cfg.sigma_h,
                    self.cfg.snr_reference,
                    self.cfg.n_seraph,
                    energy,
                )
            })
            .collect()
    }

    fn outcome(&self, r: &DetectionResult, noise_var: f64) -> Outcome {
        Outcome {
            event: match self.cfg.scenario {
                Scenario::Miss => !r.accepted,
                Scenario::FaNoise | Scenario::Intruder => r.accepted,
            },
            exceeds_psi_fa: r.beta > r.psi_fa,
            exceeds_psi_e: r.beta > r.psi_e,
            noise_ratio: (noise_var > 0.0).then(|| r.sigma2_hat / noise_var),
        }
    }

    /// Outcomes of trial `index` at every grid point.
    pub fn trial(&self, index: u64) -> Result<Vec<Outcome>> {
        match self.cfg.engine {
            Engine::Compressed => self.trial_compressed(index),
            Engine::FullFrame => self.trial_full_frame(index),
        }
    }

    fn trial_full_frame(&self, index: u64) -> Result<Vec<Outcome>> {
        let mut draws = self.draw_trial(index);
        let mut channels = ChannelMap::new();
        for ((id, paths), array) in self.registry.ids().zip(&draws.paths).zip(&self.arrays) {
            let h =
                ChannelRealization::from_paths(paths.clone(), self.cfg.sigma_h, self.seraph, array);
            channels.insert(id.to_owned(), h);
        }
        let dims = (self.cfg.n_seraph, self.cfg.t_bauds);
        let signal = match (&self.cfg.scenario, &draws.intruder) {
            (Scenario::Miss, _) => channels[NEO_ID]
                .matrix
                .dot(&self.pilots[self.target].values),
            (Scenario::Intruder, Some((array, pilot))) => {
                let h = ChannelRealization::from_paths(
                    draws.paths[self.target].clone(),
                    self.cfg.sigma_h,
                    self.seraph,
                    array,
                );
                h.matrix.dot(&pilot.values)
            }
            _ => CMatrix::zeros(dims),
        };
        let noise = CMatrix::from_shape_fn(dims, |_| complex_gaussian(&mut draws.rng, 1.0));
        let levels = self.noise_levels(&draws);
        let mut out = Vec::with_capacity(levels.len());
        for (&snr_db, &var) in self.cfg.snr_grid_db.iter().zip(&levels) {
            let frame = ReceivedFrame {
                samples: &signal + &(&noise * Complex64::new(var.sqrt(), 0.0)),
                true_noise_variance: var,
                snr_db,
            };
            // same probe positions at every grid point
            let mut rng = draws.rng.clone();
            let r = authenticate(
                &frame,
                NEO_ID,
                &self.registry,
                &channels,
                &self.detector,
                &mut rng,
            )?;
            out.push(self.outcome(&r, var));
        }
        Ok(out)
    }

    fn trial_compressed(&self, index: u64) -> Result<Vec<Outcome>> {
        let mut draws = self.draw_trial(index);
        let k = self.arrays.len();
        let t = self.cfg.t_bauds;
        let mut sources: Vec<SourceRef<'_>> = (0..k)
            .map(|d| SourceRef {
                paths: &draws.paths[d],
                tx: &self.arrays[d],
                pilot: &self.pilots[d],
            })
            .collect();
        let truth = match (&self.cfg.scenario, &draws.intruder) {
            (Scenario::Miss, _) => Some(self.target),
            (Scenario::Intruder, Some((array, pilot))) => {
                sources.push(SourceRef {
                    paths: &draws.paths[self.target],
                    tx: array,
                    pilot,
                });
                Some(k)
            }
            _ => None,
        };
        let dims = self.cfg.n_seraph * t;
        let positions = draw_probe_positions(dims, self.cfg.probe_count, &mut draws.rng)?;
        let frames = source_frames(&self.seraph, &sources, &positions);
        let n = sources.len();
        let kp = positions.len();
        let mut gram = vec![Complex64::default(); k * k];
        for i in 0..k {
            gram[i * k..(i + 1) * k].copy_from_slice(&frames.gram[i * n..i * n + k]);
        }
        let mut at = vec![Complex64::default(); kp * k];
        for r in 0..kp {
            at[r * k..(r + 1) * k].copy_from_slice(&frames.at_probes[r * n..r * n + k]);
        }
        let subspace = ProbedSubspace::new(&gram, &at, k, kp, dims)?;

        // unit noise at the probes, and its projections onto the allowlist
        // drawn given those samples
        let w: Vec<Complex64> = (0..kp)
            .map(|_| complex_gaussian(&mut draws.rng, 1.0))
            .collect();
        let mut cov = gram.clone();
        for i in 0..k {
            for j in 0..k {
                cov[i * k + j] -= (0..kp)
                    .map(|r| at[r * k + i].conj() * at[r * k + j])
                    .sum::<Complex64>();
            }
        }
        let l = linalg::psd_cholesky(&cov, k, 1e-12);
        let z: Vec<Complex64> = (0..k)
            .map(|_| complex_gaussian(&mut draws.rng, 1.0))
            .collect();
        let w_proj: Vec<Complex64> = (0..k)
            .map(|i| {
                let seen: Complex64 = (0..kp).map(|r| at[r * k + i].conj() * w[r]).sum();
                let unseen: Complex64 = (0..=i).map(|p| l[i * k + p] * z[p]).sum();
                seen + unseen
            })
            .collect();

        let levels = self.noise_levels(&draws);
        let mut out = Vec::with_capacity(levels.len());
        let mut stats = FrameStatistics {
            projections: vec![Complex64::default(); k],
            probe_samples: vec![Complex64::default(); kp],
        };
        for &var in &levels {
            let sigma = var.sqrt();
            for i in 0..k {
                let signal = truth.map_or(Complex64::default(), |j| frames.gram[i * n + j]);
                stats.projections[i] = signal + w_proj[i] * sigma;
            }
            for r in 0..kp {
                let signal = truth.map_or(Complex64::default(), |j| frames.at_probes[r * n + j]);
                stats.probe_samples[r] = signal + w[r] * sigma;
            }
            let res =
                authenticate_statistics(&subspace, &gram, self.target, &stats, &self.detector)?;
            out.push(self.outcome(&res, var));
        }
        Ok(out)
    }
}

/// A transmitter as seen through its own multipath channel.
pub(crate) struct SourceRef<'a> {
    pub paths: &'a [Path],
    pub tx: &'a dyn ArrayResponse,
    pub pilot: &'a PilotMatrix,
}

/// Noiseless frames `s_j = H_j·X_j`, summarised.
#[derive(Debug, Clone)]
pub(crate) struct SourceFrames {
    /// `⟨s_i, s_j⟩`, row-major `n × n`.
    pub gram: Vec<Complex64>,
    /// `s_j` at each probe position, row-major `K × n`.
    pub at_probes: Vec<Complex64>,
}

/// Complex vectors stored as separate real and imaginary parts, which lets
/// the inner products below vectorise.
#[derive(Debug, Clone, Default)]
struct Split {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Split {
    fn zeros(len: usize) -> Self {
        Self {
            re: vec![0.0; len],
            im: vec![0.0; len],
        }
    }

    fn from_complex(v: impl IntoIterator<Item = Complex64>) -> Self {
        let (re, im) = v.into_iter().map(|z| (z.re, z.im)).unzip();
        Self { re, im }
    }

    fn get(&self, i: usize) -> Complex64 {
        Complex64::new(self.re[i], self.im[i])
    }

    /// `Σ conj(self[r])·other[r]` over `r ∈ a..a+len` and `b..b+len`.
    fn dot(&self, a: usize, other: &Split, b: usize, len: usize) -> Complex64 {
        let (ar, ai) = (&self.re[a..a + len], &self.im[a..a + len]);
        let (br, bi) = (&other.re[b..b + len], &other.im[b..b + len]);
        let mut re = [0.0f64; 4];
        let mut im = [0.0f64; 4];
        let body = len / 4 * 4;
        for c in (0..body).step_by(4) {
            for l in 0..4 {
                let i = c + l;
                re[l] += ar[i] * br[i] + ai[i] * bi[i];
                im[l] += ar[i] * bi[i] - ai[i] * br[i];
            }
        }
        for i in body..len {
            re[0] += ar[i] * br[i] + ai[i] * bi[i];
            im[0] += ar[i] * bi[i] - ai[i] * br[i];
        }
        Complex64::new(re.iter().sum(), im.iter().sum())
    }
}

struct SourcePrep {
    /// `g_p·√(N_s·M)`.
    gains: Vec<Complex64>,
    /// `B = E_tᴴ·X`, row-major `L × T`.
    b: Split,
    /// Horizontal and vertical receive ULA factors, row-major `L × N_h` and
    /// `L × N_v`.
    rx_h: Split,
    rx_v: Split,
    /// `rx_h` scaled by the path gains.
    gain_h: Vec<Complex64>,
}

fn ula_recurrence(cosine: f64, len: usize, out: &mut Vec<Complex64>) {
    let step = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * HALF_WAVELENGTH * cosine);
    let mut z = Complex64::new(1.0 / (len as f64).sqrt(), 0.0);
    for _ in 0..len {
        out.push(z);
        z *= step;
    }
}

fn prepare(seraph: &PlanarArray, src: &SourceRef<'_>) -> SourcePrep {
    let m = src.tx.element_count();
    let t = src.pilot.bauds();
    let l = src.paths.len();
    let scale = ((seraph.element_count() * m) as f64).sqrt();
    let x = Split::from_complex(src.pilot.values.iter().copied());
    let mut b = Split::zeros(l * t);
    let mut et = vec![Complex64::default(); m];
    for (p, path) in src.paths.iter().enumerate() {
        src.tx.response_into(path.tx_dir, &mut et);
        let (br, bi) = (&mut b.re[p * t..(p + 1) * t], &mut b.im[p * t..(p + 1) * t]);
        for (mi, e) in et.iter().enumerate() {
            // conj(e)·x
            let (cr, ci) = (e.re, -e.im);
            let (xr, xi) = (&x.re[mi * t..(mi + 1) * t], &x.im[mi * t..(mi + 1) * t]);
            for k in 0..t {
                br[k] += cr * xr[k] - ci * xi[k];
                bi[k] += cr * xi[k] + ci * xr[k];
            }
        }
    }
    let gains: Vec<Complex64> = src.paths.iter().map(|p| p.gain * scale).collect();
    let mut h = Vec::with_capacity(l * seraph.h_count);
    let mut v = Vec::with_capacity(l * seraph.v_count);
    for p in src.paths {
        ula_recurrence(p.rx_dir.horizontal_cosine(), seraph.h_count, &mut h);
        ula_recurrence(p.rx_dir.vertical_cosine(), seraph.v_count, &mut v);
    }
    let gain_h = h
        .chunks_exact(seraph.h_count)
        .zip(&gains)
        .flat_map(|(row, g)| row.iter().map(move |z| g * z))
        .collect();
    SourcePrep {
        gains,
        b,
        rx_h: Split::from_complex(h),
        rx_v: Split::from_complex(v),
        gain_h,
    }
}

pub(crate) fn source_frames(
    seraph: &PlanarArray,
    sources: &[SourceRef<'_>],
    positions: &[usize],
) -> SourceFrames {
    let n = sources.len();
    let preps: Vec<SourcePrep> = sources.iter().map(|s| prepare(seraph, s)).collect();
    let t = sources.first().map_or(0, |s| s.pilot.bauds());
    let (h_count, v_count) = (seraph.h_count, seraph.v_count);
    let mut gram = vec![Complex64::default(); n * n];
    let mut rx_cache: Vec<((usize, usize), Vec<Complex64>)> = Vec::new();
    for i in 0..n {
        for j in i..n {
            let (pi, pj) = (sources[i].paths, sources[j].paths);
            let (li, lj) = (pi.len(), pj.len());
            let (a, c) = (&preps[i], &preps[j]);
            let same_paths = std::ptr::eq(pi, pj);
            let key = (pi.as_ptr() as usize, pj.as_ptr() as usize);
            let r_idx = match rx_cache.iter().position(|(k, _)| *k == key) {
                Some(idx) => idx,
                None => {
                    // ⟨e_r(Ω_p), e_r(Ω_q)⟩ factors over the two array axes
                    let mut r = vec![Complex64::default(); li * lj];
                    for p in 0..li {
                        for q in 0..lj {
                            r[p * lj + q] = if same_paths && q < p {
                                r[q * lj + p].conj()
                            } else {
                                a.rx_h.dot(p * h_count, &c.rx_h, q * h_count, h_count)
                                    * a.rx_v.dot(p * v_count, &c.rx_v, q * v_count, v_count)
                            };
                        }
                    }
                    rx_cache.push((key, r));
                    rx_cache.len() - 1
                }
            };
            let r = &rx_cache[r_idx].1;
            let mut acc = Complex64::default();
            if i == j {
                for p in 0..li {
                    let diag = a.b.dot(p * t, &a.b, p * t, t).re;
                    acc += a.gains[p].norm_sqr() * r[p * lj + p] * diag;
                    let gp = a.gains[p].conj();
                    for q in p + 1..lj {
                        let d = a.b.dot(p * t, &c.b, q * t, t);
                        acc += 2.0 * (gp * c.gains[q] * r[p * lj + q] * d).re;
                    }
                }
                gram[i * n + i] = Complex64::new(acc.re, 0.0);
            } else {
                for p in 0..li {
                    let gp = a.gains[p].conj();
                    for q in 0..lj {
                        let d = a.b.dot(p * t, &c.b, q * t, t);
                        acc += gp * c.gains[q] * r[p * lj + q] * d;
                    }
                }
                gram[i * n + j] = acc;
                gram[j * n + i] = acc.conj();
            }
        }
    }
    let mut at_probes = Vec::with_capacity(positions.len() * n);
    for &pos in positions {
        let (row, col) = (pos / t, pos % t);
        let (ih, iv) = (row / v_count, row % v_count);
        for prep in &preps {
            let mut s = Complex64::default();
            for p in 0..prep.gains.len() {
                s += prep.gain_h[p * h_count + ih]
                    * prep.rx_v.get(p * v_count + iv)
                    * prep.b.get(p * t + col);
            }
            at_probes.push(s);
        }
    }
    SourceFrames { gram, at_probes }
}

/// Runs trials `range` and returns their counts. Trials are grouped in
/// chunks aligned to absolute trial indices and merged in index order, so
/// the result does not depend on `threads`.
pub fn run_trial_range(
    experiment: &Experiment,
    range: Range<u64>,
    threads: Option<usize>,
) -> Result<Tally> {
    let grid = experiment.cfg.snr_grid_db.len();
    let mut chunks = Vec::new();
    let mut start = range.start;
    while start < range.end {
        let end = ((start / CHUNK + 1) * CHUNK).min(range.end);
        chunks.push(start..end);
        start = end;
    }
    let work = || -> Result<Vec<Tally>> {
        chunks
            .par_iter()
            .map(|r| {
                let mut tally = Tally::new(grid);
                for i in r.clone() {
                    tally.add(&experiment.trial(i)?);
                }
                Ok(tally)
            })
            .collect()
    };
    let parts = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let mut total = Tally::new(grid);
    for p in &parts {
        total.merge(p)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub snr_db: f64,
    pub trials: u64,
    pub events: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Fraction of trials with `β > ψ_FA`, whatever `ψ_e`.
    pub psi_fa_rate: f64,
    pub noise_ratio_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub scenario: Scenario,
    pub points: Vec<RatePoint>,
    pub config: ExperimentConfig,
}

impl RateCurve {
    pub fn from_tally(cfg: &ExperimentConfig, tally: &Tally) -> Result<Self> {
        let points = cfg
            .snr_grid_db
            .iter()
            .zip(&tally.points)
            .map(|(&snr_db, p)| {
                let (ci_low, ci_high) = wilson_interval(p.events, p.trials, CI_LEVEL)?;
                Ok(RatePoint {
                    snr_db,
                    trials: p.trials,
                    events: p.events,
                    rate: p.rate(),
                    ci_low,
                    ci_high,
                    psi_fa_rate: p.psi_fa_exceedances as f64 / p.trials as f64,
                    noise_ratio_mean: p.noise_ratio_mean(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scenario: cfg.scenario,
            points,
            config: cfg.clone(),
        })
    }
}

/// Runs the configured scenario over the full grid.
pub fn run_curve(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RateCurve> {
    let experiment = Experiment::new(cfg.clone())?;
    let tally = run_trial_range(&experiment, 0..cfg.trials_per_point, threads)?;
    RateCurve::from_tally(cfg, &tally)
}

fn run_scenario(
    cfg: &ExperimentConfig,
    expected: Scenario,
    threads: Option<usize>,
) -> Result<RateCurve> {
    if cfg.scenario != expected {
        return Err(invalid(format!(
            "configuration is for `{}`, not `{expected}`",
            cfg.scenario
        )));
    }
    run_curve(cfg, threads)
}

/// Missed-detection rate of the enrolled device.
pub fn run_miss_curve(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RateCurve> {
    run_scenario(cfg, Scenario::Miss, threads)
}

/// Acceptance rate when only noise is received.
pub fn run_fa_noise_curve(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RateCurve> {
    run_scenario(cfg, Scenario::FaNoise, threads)
}

/// Acceptance rate of an intruder with an independent signature and pilot.
pub fn run_intruder_curve(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RateCurve> {
    run_scenario(cfg, Scenario::Intruder, threads)
}

pub const CSV_HEADER: &str =
    "scenario,snr_db,m_active,n_seraph,pfa_target,trials,events,rate,ci_low,ci_high,master_seed";

pub fn write_csv<W: Write>(curves: &[RateCurve], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for c in curves {
        let cfg = &c.config;
        for p in &c.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                c.scenario,
                p.snr_db,
                cfg.m_active,
                cfg.n_seraph,
                cfg.pfa_target,
                p.trials,
                p.events,
                p.rate,
                p.ci_low,
                p.ci_high,
                cfg.master_seed
            )?;
        }
    }
    Ok(())
}

pub fn csv_string(curves: &[RateCurve]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(curves, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV is ASCII"))
}

/// Writes the CSV through a temporary file so a failed run leaves nothing.
pub fn save_csv(curves: &[RateCurve], path: &FsPath) -> Result<()> {
    write_atomic(path, csv_string(curves)?.as_bytes())
}
