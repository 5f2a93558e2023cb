//! Correlation receiver with a dual-threshold decision.
//!
//! With `s = H·X` the expected frame of the claimed device and `y` the
//! received frame:
//!
//! * `ρ = Re⟨s, y⟩ = Re tr(Xᴴ·Hᴴ·y)`
//! * `β = ρ / σ̂²`, with `σ̂²` estimated from `K` orthonormal probes
//!   orthogonal to every allowlisted expected signal
//! * `ψ_e = ‖s‖² / (2σ̂²)`, the midpoint between the noise-only and
//!   matched means of `β`
//! * `ψ_FA = Q⁻¹(p_FA)·√(‖s‖² / (2σ̂²))`, since under noise only
//!   `ρ ~ N(0, σ²‖s‖²/2)`
//! * accept iff `β > max(ψ_e, ψ_FA)`.
//!
//! Noise estimation uses canonical probes: `K` random frame positions are
//! projected off the signal span and orthonormalised. The resulting
//! estimate is evaluated in closed form from the Gram matrix of the signals,
//! their values at the probe positions, `Sᴴy` and `y` at the probe
//! positions ([`ProbedSubspace`]), so it never materialises a probe vector.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, ReceivedFrame};
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::pilot::PilotMatrix;
use crate::registry::Registry;
use crate::seeding::complex_gaussian;
use crate::stats::q_inverse;
use crate::CMatrix;

pub const DEFAULT_PROBE_COUNT: usize = 256;
pub const MIN_PROBE_COUNT: usize = 8;

/// Relative residual energy below which an allowlisted signal is treated as
/// a combination of the ones before it.
const SPAN_TOLERANCE: f64 = 1e-10;
/// Smallest admissible pivot of `I − WᴴW`; smaller means some probe position
/// is (numerically) inside the signal span.
const PROBE_PIVOT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Random frame positions projected off the signal span.
    #[default]
    Canonical,
    /// Complex Gaussian vectors projected off the span with explicit
    /// Gram–Schmidt. `O(D·K²)`; meant for small frames.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub pfa_target: f64,
    pub probe_count: usize,
    #[serde(default)]
    pub probe_kind: ProbeKind,
    /// Use this value in place of `σ̂²`. Test hook for noiseless frames,
    /// where the probe estimate is exactly zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_noise_variance: Option<f64>,
}

impl DetectorConfig {
    pub fn new(pfa_target: f64) -> Self {
        Self {
            pfa_target,
            probe_count: DEFAULT_PROBE_COUNT,
            probe_kind: ProbeKind::Canonical,
            fixed_noise_variance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_pfa(self.pfa_target)?;
        if self.probe_count < MIN_PROBE_COUNT {
            return Err(invalid(format!(
                "probe count {} below minimum {MIN_PROBE_COUNT}",
                self.probe_count
            )));
        }
        if let Some(v) = self.fixed_noise_variance {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!(
                    "fixed noise variance must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn check_pfa(pfa: f64) -> Result<()> {
    if pfa > 0.0 && pfa < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("false-alarm target {pfa} outside (0, 1)")))
    }
}

/// Full diagnostics of one authentication attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub rho: f64,
    pub sigma2_hat: f64,
    pub beta: f64,
    pub psi_e: f64,
    pub psi_fa: f64,
    pub psi: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub psi: f64,
    pub accepted: bool,
}

/// `⟨a, b⟩ = Σ conj(a)·b` over all entries.
pub fn frame_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(u, v)| u.conj() * v).sum()
}

pub fn frame_energy(a: &CMatrix) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

fn expected_frame(x: &PilotMatrix, h: &ChannelRealization) -> Result<CMatrix> {
    if h.m_antennas() != x.antennas() {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} transmit columns, pilot has {} antennas",
            h.m_antennas(),
            x.antennas()
        )));
    }
    Ok(h.matrix.dot(&x.values))
}

/// `ρ = Re tr(Xᴴ·Hᴴ·y)`.
pub fn correlate(x: &PilotMatrix, h: &ChannelRealization, y: &ReceivedFrame) -> Result<f64> {
    let s = expected_frame(x, h)?;
    if s.dim() != y.samples.dim() {
        return Err(Error::DimensionMismatch(format!(
            "expected frame {:?}, received {:?}",
            s.dim(),
            y.samples.dim()
        )));
    }
    Ok(frame_inner(&s, &y.samples).re)
}

/// `β = ρ/σ̂²`.
pub fn detection_metric(rho: f64, sigma2_hat: f64) -> Result<f64> {
    check_sigma2(sigma2_hat)?;
    Ok(rho / sigma2_hat)
}

fn check_sigma2(sigma2_hat: f64) -> Result<()> {
    if sigma2_hat > 0.0 && sigma2_hat.is_finite() {
        Ok(())
    } else {
        Err(Error::DegenerateEstimate(sigma2_hat))
    }
}

/// `ψ_e = ‖s‖²/(2σ̂²)` from the expected-frame energy.
pub fn equidistant_threshold(signal_energy: f64, sigma2_hat: f64) -> Result<f64> {
    check_sigma2(sigma2_hat)?;
    Ok(signal_energy / (2.0 * sigma2_hat))
}

/// `ψ_FA = Q⁻¹(p_FA)·√(‖s‖²/(2σ̂²))` from the expected-frame energy.
pub fn fa_threshold(signal_energy: f64, sigma2_hat: f64, pfa: f64) -> Result<f64> {
    check_sigma2(sigma2_hat)?;
    check_pfa(pfa)?;
    Ok(q_inverse(pfa)? * (signal_energy / (2.0 * sigma2_hat)).sqrt())
}

pub fn threshold_equidistant(
    x: &PilotMatrix,
    h: &ChannelRealization,
    sigma2_hat: f64,
) -> Result<f64> {
    check_sigma2(sigma2_hat)?;
    equidistant_threshold(frame_energy(&expected_frame(x, h)?), sigma2_hat)
}

pub fn threshold_fa(
    x: &PilotMatrix,
    h: &ChannelRealization,
    sigma2_hat: f64,
    pfa: f64,
) -> Result<f64> {
    check_pfa(pfa)?;
    check_sigma2(sigma2_hat)?;
    fa_threshold(frame_energy(&expected_frame(x, h)?), sigma2_hat, pfa)
}

/// `ψ = max(ψ_e, ψ_FA)`; ties reject.
pub fn decide(beta: f64, psi_e: f64, psi_fa: f64) -> Decision {
    let psi = psi_e.max(psi_fa);
    Decision {
        psi,
        accepted: beta > psi,
    }
}

/// Metric, both thresholds and the decision from `ρ`, `‖s‖²` and `σ̂²`.
pub fn evaluate(
    rho: f64,
    signal_energy: f64,
    sigma2_hat: f64,
    pfa: f64,
) -> Result<DetectionResult> {
    let beta = detection_metric(rho, sigma2_hat)?;
    let psi_e = equidistant_threshold(signal_energy, sigma2_hat)?;
    let psi_fa = fa_threshold(signal_energy, sigma2_hat, pfa)?;
    let d = decide(beta, psi_e, psi_fa);
    Ok(DetectionResult {
        rho,
        sigma2_hat,
        beta,
        psi_e,
        psi_fa,
        psi: d.psi,
        accepted: d.accepted,
    })
}

/// The allowlisted signals `S` (`D × k`) as seen by the canonical-probe
/// estimator at a fixed set of `K` frame positions.
#[derive(Debug, Clone)]
pub struct ProbedSubspace {
    signals: usize,
    rank: usize,
    probes: usize,
    /// `C` (`k × r`) with `U = S·C` orthonormal.
    coef: Vec<Complex64>,
    /// `W = U[idx]` (`K × r`).
    w: Vec<Complex64>,
    /// Cholesky factor of `I − WᴴW`.
    chol: Vec<Complex64>,
}

impl ProbedSubspace {
    /// `gram` is `SᴴS` (`k × k`), `at_probes` is `S[idx]` (`K × k`), both
    /// row-major; `frame_dims` is `D`.
    pub fn new(
        gram: &[Complex64],
        at_probes: &[Complex64],
        signals: usize,
        probes: usize,
        frame_dims: usize,
    ) -> Result<Self> {
        if gram.len() != signals * signals || at_probes.len() != probes * signals {
            return Err(Error::DimensionMismatch(format!(
                "gram has {} entries and probe rows {} for k={signals}, K={probes}",
                gram.len(),
                at_probes.len()
            )));
        }
        let (coef, rank) = linalg::gram_orthonormal_coefficients(gram, signals, SPAN_TOLERANCE);
        if probes == 0 || probes + rank > frame_dims {
            return Err(Error::InsufficientDimensions {
                probes,
                rank,
                frame_dims,
            });
        }
        let mut w = vec![Complex64::default(); probes * rank];
        for i in 0..probes {
            for c in 0..rank {
                w[i * rank + c] = (0..signals)
                    .map(|j| at_probes[i * signals + j] * coef[j * rank + c])
                    .sum();
            }
        }
        let mut m = vec![Complex64::default(); rank * rank];
        for a in 0..rank {
            for b in 0..rank {
                let wtw: Complex64 = (0..probes)
                    .map(|i| w[i * rank + a].conj() * w[i * rank + b])
                    .sum();
                m[a * rank + b] = if a == b {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::default()
                } - wtw;
            }
        }
        let chol = linalg::cholesky(&m, rank, PROBE_PIVOT_TOLERANCE).ok_or_else(|| {
            // locate the offending probe for the message
            let worst = (0..probes)
                .max_by(|&a, &b| {
                    let na: f64 = (0..rank).map(|c| w[a * rank + c].norm_sqr()).sum();
                    let nb: f64 = (0..rank).map(|c| w[b * rank + c].norm_sqr()).sum();
                    na.total_cmp(&nb)
                })
                .unwrap_or(0);
            Error::ProbeInSignalSpan(worst)
        })?;
        Ok(Self {
            signals,
            rank,
            probes,
            coef,
            w,
            chol,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn probes(&self) -> usize {
        self.probes
    }

    /// `σ̂²` from `Sᴴy` (`k`) and `y[idx]` (`K`).
    pub fn noise_variance(
        &self,
        projections: &[Complex64],
        probe_samples: &[Complex64],
    ) -> Result<f64> {
        if projections.len() != self.signals || probe_samples.len() != self.probes {
            return Err(Error::DimensionMismatch(format!(
                "expected {} projections and {} probe samples, got {} and {}",
                self.signals,
                self.probes,
                projections.len(),
                probe_samples.len()
            )));
        }
        let r = self.rank;
        // a = Uᴴy = Cᴴ·(Sᴴy)
        let a: Vec<Complex64> = (0..r)
            .map(|c| {
                (0..self.signals)
                    .map(|j| self.coef[j * r + c].conj() * projections[j])
                    .sum()
            })
            .collect();
        // z = y[idx] − W·a, the projected probes' raw correlations
        let mut v = vec![Complex64::default(); r];
        let mut zz = 0.0;
        for (i, yi) in probe_samples.iter().enumerate() {
            let row = &self.w[i * r..(i + 1) * r];
            let z = yi
                - row
                    .iter()
                    .zip(&a)
                    .map(|(wi, ai)| wi * ai)
                    .sum::<Complex64>();
            zz += z.norm_sqr();
            for (vc, wi) in v.iter_mut().zip(row) {
                *vc += wi.conj() * z;
            }
        }
        // ‖P_Q y‖² = zᴴ(I − WWᴴ)⁻¹z = ‖z‖² + vᴴ(I − WᴴW)⁻¹v
        let energy = zz + linalg::inverse_quadratic_form(&self.chol, r, &v);
        Ok(energy / self.probes as f64)
    }
}

/// Everything the decision needs from one received frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStatistics {
    /// `⟨s_i, y⟩` for every allowlisted signal.
    pub projections: Vec<Complex64>,
    /// `y` at the probe positions.
    pub probe_samples: Vec<Complex64>,
}

/// Decision for allowlist entry `target` from precomputed statistics.
/// `gram` is the same `SᴴS` the subspace was built from.
pub fn authenticate_statistics(
    subspace: &ProbedSubspace,
    gram: &[Complex64],
    target: usize,
    frame: &FrameStatistics,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    let k = subspace.signals;
    if target >= k {
        return Err(invalid(format!(
            "target index {target} outside allowlist of {k}"
        )));
    }
    let sigma2 = match cfg.fixed_noise_variance {
        Some(v) => v,
        None => subspace.noise_variance(&frame.projections, &frame.probe_samples)?,
    };
    evaluate(
        frame.projections[target].re,
        gram[target * k + target].re,
        sigma2,
        cfg.pfa_target,
    )
}

/// Row-major entries of the `k × k` Gram matrix `SᴴS`.
pub fn gram_matrix(signals: &[CMatrix]) -> Vec<Complex64> {
    let k = signals.len();
    let mut g = vec![Complex64::default(); k * k];
    for i in 0..k {
        for j in i..k {
            let v = frame_inner(&signals[i], &signals[j]);
            g[i * k + j] = v;
            g[j * k + i] = v.conj();
        }
    }
    g
}

/// Draws `probes` distinct flat positions in a frame of `frame_dims` samples.
pub fn draw_probe_positions<R: Rng + ?Sized>(
    frame_dims: usize,
    probes: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if probes > frame_dims {
        return Err(Error::InsufficientDimensions {
            probes,
            rank: 0,
            frame_dims,
        });
    }
    Ok(rand::seq::index::sample(rng, frame_dims, probes).into_vec())
}

fn check_frames(y: &CMatrix, signals: &[CMatrix]) -> Result<()> {
    for s in signals {
        if s.dim() != y.dim() {
            return Err(Error::DimensionMismatch(format!(
                "expected signal {:?} vs frame {:?}",
                s.dim(),
                y.dim()
            )));
        }
    }
    Ok(())
}

/// Frame statistics and probed subspace at the given flat positions.
pub fn probe_frame(
    y: &CMatrix,
    signals: &[CMatrix],
    positions: &[usize],
) -> Result<(ProbedSubspace, FrameStatistics)> {
    check_frames(y, signals)?;
    let flat = |m: &CMatrix, p: usize| m[[p / m.ncols(), p % m.ncols()]];
    let k = signals.len();
    let gram = gram_matrix(signals);
    let mut at_probes = Vec::with_capacity(positions.len() * k);
    for &p in positions {
        if p >= y.len() {
            return Err(invalid(format!(
                "probe position {p} outside frame of {}",
                y.len()
            )));
        }
        at_probes.extend(signals.iter().map(|s| flat(s, p)));
    }
    let subspace = ProbedSubspace::new(&gram, &at_probes, k, positions.len(), y.len())?;
    let stats = FrameStatistics {
        projections: signals.iter().map(|s| frame_inner(s, y)).collect(),
        probe_samples: positions.iter().map(|&p| flat(y, p)).collect(),
    };
    Ok((subspace, stats))
}

/// `σ̂² = (1/K)·Σ|⟨q_j, y⟩|²` over `K` orthonormal probes orthogonal to
/// every expected signal.
pub fn estimate_noise_variance<R: Rng + ?Sized>(
    y: &ReceivedFrame,
    expected_signals: &[CMatrix],
    probes: usize,
    kind: ProbeKind,
    rng: &mut R,
) -> Result<f64> {
    if probes == 0 {
        return Err(invalid("need at least one probe"));
    }
    check_frames(&y.samples, expected_signals)?;
    let d = y.samples.len();
    match kind {
        ProbeKind::Canonical => {
            let (_, rank) = linalg::gram_orthonormal_coefficients(
                &gram_matrix(expected_signals),
                expected_signals.len(),
                SPAN_TOLERANCE,
            );
            if probes + rank > d {
                return Err(Error::InsufficientDimensions {
                    probes,
                    rank,
                    frame_dims: d,
                });
            }
            let positions = draw_probe_positions(d, probes, rng)?;
            let (sub, stats) = probe_frame(&y.samples, expected_signals, &positions)?;
            sub.noise_variance(&stats.projections, &stats.probe_samples)
        }
        ProbeKind::Gaussian => {
            let candidates: Vec<Vec<Complex64>> = (0..probes)
                .map(|_| (0..d).map(|_| complex_gaussian(rng, 1.0)).collect())
                .collect();
            let q = explicit_probes(expected_signals, candidates)?;
            Ok(estimate_with_probes(&y.samples, &q))
        }
    }
}

/// Reference construction: projects each candidate off the span of the
/// signals and orthonormalises it against the previous probes.
pub fn explicit_probes(
    signals: &[CMatrix],
    candidates: Vec<Vec<Complex64>>,
) -> Result<Vec<Vec<Complex64>>> {
    let d = signals
        .first()
        .map_or_else(|| candidates.first().map_or(0, Vec::len), |s| s.len());
    let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b).map(|(u, v)| u.conj() * v).sum()
    };
    // orthonormal basis of the signal span, dropping dependent signals
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for s in signals {
        let mut v: Vec<Complex64> = s.iter().copied().collect();
        let own: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if own == 0.0 {
            continue;
        }
        orthogonalise(&mut v, &basis, dot);
        let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if n2 > SPAN_TOLERANCE * own {
            let inv = 1.0 / n2.sqrt();
            v.iter_mut().for_each(|z| *z *= inv);
            basis.push(v);
        }
    }
    let rank = basis.len();
    if candidates.len() + rank > d {
        return Err(Error::InsufficientDimensions {
            probes: candidates.len(),
            rank,
            frame_dims: d,
        });
    }
    let mut probes: Vec<Vec<Complex64>> = Vec::with_capacity(candidates.len());
    for (j, mut v) in candidates.into_iter().enumerate() {
        if v.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "probe candidate of length {} in frame of {d}",
                v.len()
            )));
        }
        let own: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        orthogonalise(&mut v, &basis, dot);
        orthogonalise(&mut v, &probes, dot);
        let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if !(n2 > PROBE_PIVOT_TOLERANCE * own) {
            return Err(Error::ProbeInSignalSpan(j));
        }
        let inv = 1.0 / n2.sqrt();
        v.iter_mut().for_each(|z| *z *= inv);
        probes.push(v);
    }
    Ok(probes)
}

fn orthogonalise(
    v: &mut [Complex64],
    basis: &[Vec<Complex64>],
    dot: impl Fn(&[Complex64], &[Complex64]) -> Complex64,
) {
    for _ in 0..2 {
        for b in basis {
            let p = dot(b, v);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= p * bi;
            }
        }
    }
}

/// `(1/K)·Σ|⟨q_j, y⟩|²` for explicit probes.
pub fn estimate_with_probes(y: &CMatrix, probes: &[Vec<Complex64>]) -> f64 {
    let total: f64 = probes
        .iter()
        .map(|q| {
            q.iter()
                .zip(y.iter())
                .map(|(a, b)| a.conj() * b)
                .sum::<Complex64>()
                .norm_sqr()
        })
        .sum();
    total / probes.len() as f64
}

/// Per-device channel realizations, keyed by device id.
pub type ChannelMap = BTreeMap<String, ChannelRealization>;

/// End-to-end decision on whether `y` came from `device_id`.
///
/// Probes are orthogonal to the expected signals of every enrolled device,
/// so `channels` must hold a realization for each of them.
pub fn authenticate<R: Rng + ?Sized>(
    y: &ReceivedFrame,
    device_id: &str,
    registry: &Registry,
    channels: &ChannelMap,
    cfg: &DetectorConfig,
    rng: &mut R,
) -> Result<DetectionResult> {
    cfg.validate()?;
    registry.get(device_id)?;
    let signals = registry.expected_signals(channels)?;
    let target = signals
        .iter()
        .position(|(id, _)| id == device_id)
        .ok_or_else(|| Error::UnknownDevice(device_id.to_owned()))?;
    let frames: Vec<CMatrix> = signals.into_iter().map(|(_, s)| s).collect();
    check_frames(&y.samples, &frames)?;
    let d = y.samples.len();
    match cfg.probe_kind {
        ProbeKind::Canonical => {
            let positions = draw_probe_positions(d, cfg.probe_count, rng)?;
            let (sub, stats) = probe_frame(&y.samples, &frames, &positions)?;
            authenticate_statistics(&sub, &gram_matrix(&frames), target, &stats, cfg)
        }
        ProbeKind::Gaussian => {
            let s = &frames[target];
            let sigma2 = match cfg.fixed_noise_variance {
                Some(v) => v,
                None => {
                    estimate_noise_variance(y, &frames, cfg.probe_count, ProbeKind::Gaussian, rng)?
                }
            };
            evaluate(
                frame_inner(s, &y.samples).re,
                frame_energy(s),
                sigma2,
                cfg.pfa_target,
            )
        }
    }
}
