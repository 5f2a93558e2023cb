//! Steering vectors and chaotically perturbed spatial signatures.
//!
//! A uniform linear array of `m` elements with spacing `d` (in wavelengths)
//! has unit signature `(1/√m)·[1, e^{−j2πd c}, …, e^{−j2π(m−1)d c}]` towards a
//! direction with directional cosine `c`. Planar arrays are the Kronecker
//! product of a horizontal ULA (cosine `cos(el)·sin(az)`) and a vertical ULA
//! (cosine `sin(el)`), both at half-wavelength spacing.
//!
//! A chaotic array multiplies its nominal signature elementwise by
//! `(1 + h̃)/√2`, where `h̃` is the device's enrolled CN(0, 1) vector.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hexfloat;
use crate::seeding::{complex_gaussian, rng_from_seed};

/// Element spacing of every array in the crate, in wavelengths.
pub const HALF_WAVELENGTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !(-PI..PI).contains(&azimuth) || !(-PI / 2.0..=PI / 2.0).contains(&elevation) {
            return Err(invalid(format!(
                "direction (az={azimuth}, el={elevation}) outside [-pi, pi) x [-pi/2, pi/2]"
            )));
        }
        Ok(Self { azimuth, elevation })
    }

    pub const BROADSIDE: Direction = Direction {
        azimuth: 0.0,
        elevation: 0.0,
    };

    /// Azimuth ~ U(−π, π), elevation ~ U(−π/2, π/2).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            azimuth: rng.random_range(-PI..PI),
            elevation: rng.random_range(-PI / 2.0..PI / 2.0),
        }
    }

    pub fn horizontal_cosine(&self) -> f64 {
        self.elevation.cos() * self.azimuth.sin()
    }

    pub fn vertical_cosine(&self) -> f64 {
        self.elevation.sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignatureKind {
    NominalUnit,
    PerturbedUnit,
    Scaled,
    ScaledPerturbed,
}

impl SignatureKind {
    pub fn is_unit(self) -> bool {
        matches!(self, Self::NominalUnit | Self::PerturbedUnit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSignature {
    pub values: Vec<Complex64>,
    pub kind: SignatureKind,
    /// Channel-gain square root; only set on scaled kinds.
    pub sigma_h: Option<f64>,
}

impl SpatialSignature {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    /// `σ_h ·` this unit signature.
    pub fn scaled(&self, sigma_h: f64) -> Result<Self> {
        if !self.kind.is_unit() {
            return Err(invalid("only unit signatures can be scaled"));
        }
        if !(sigma_h > 0.0) {
            return Err(invalid(format!("sigma_h must be positive, got {sigma_h}")));
        }
        Ok(Self {
            values: self.values.iter().map(|v| v * sigma_h).collect(),
            kind: match self.kind {
                SignatureKind::NominalUnit => SignatureKind::Scaled,
                _ => SignatureKind::ScaledPerturbed,
            },
            sigma_h: Some(sigma_h),
        })
    }
}

/// The enrolled CN(0, 1) perturbation vector `h̃` of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaoticNoise {
    pub seed: u64,
    #[serde(with = "hexfloat::complex_vec")]
    pub values: Vec<Complex64>,
}

impl ChaoticNoise {
    pub fn generate(len: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        Self::draw(len, seed, &mut rng)
    }

    pub(crate) fn draw<R: Rng + ?Sized>(len: usize, seed: u64, rng: &mut R) -> Self {
        let values = (0..len).map(|_| complex_gaussian(rng, 1.0)).collect();
        Self { seed, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Writes the unit ULA steering vector into `out`.
pub(crate) fn ula_into(spacing: f64, cosine: f64, out: &mut [Complex64]) {
    let amp = 1.0 / (out.len() as f64).sqrt();
    for (k, v) in out.iter_mut().enumerate() {
        *v = Complex64::from_polar(amp, -2.0 * PI * spacing * k as f64 * cosine);
    }
}

pub fn ula_unit_signature(m: usize, spacing: f64, cosine: f64) -> Result<SpatialSignature> {
    if m == 0 {
        return Err(invalid("ULA needs at least one element"));
    }
    if !(spacing > 0.0) {
        return Err(invalid(format!(
            "element spacing must be positive, got {spacing}"
        )));
    }
    let mut values = vec![Complex64::default(); m];
    ula_into(spacing, cosine, &mut values);
    Ok(SpatialSignature {
        values,
        kind: SignatureKind::NominalUnit,
        sigma_h: None,
    })
}

/// `kron(a, b)` with `a` as the outer (slow) index.
pub fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x * y))
        .collect()
}

pub fn planar_unit_signature(
    h_count: usize,
    v_count: usize,
    dir: Direction,
) -> Result<SpatialSignature> {
    let h = ula_unit_signature(h_count, HALF_WAVELENGTH, dir.horizontal_cosine())?;
    let v = ula_unit_signature(v_count, HALF_WAVELENGTH, dir.vertical_cosine())?;
    Ok(SpatialSignature {
        values: kron(&h.values, &v.values),
        kind: SignatureKind::NominalUnit,
        sigma_h: None,
    })
}

/// `e_n = e_t ⊙ (1 + h̃) / √2`.
pub fn perturb_signature(e_t: &SpatialSignature, noise: &ChaoticNoise) -> Result<SpatialSignature> {
    if e_t.kind != SignatureKind::NominalUnit {
        return Err(invalid("perturbation applies to a nominal unit signature"));
    }
    check_len(e_t.len(), noise.len())?;
    let values = e_t
        .values
        .iter()
        .zip(&noise.values)
        .map(|(e, h)| e * (1.0 + h) * FRAC_1_SQRT_2)
        .collect();
    Ok(SpatialSignature {
        values,
        kind: SignatureKind::PerturbedUnit,
        sigma_h: None,
    })
}

/// The scaled perturbed signature `h_n = (h + σ_h·h̃⊙e_t)/√2` with
/// `h = σ_h·e_t`, evaluated term by term.
pub fn scaled_perturbed_signature(
    e_t: &SpatialSignature,
    noise: &ChaoticNoise,
    sigma_h: f64,
) -> Result<SpatialSignature> {
    let h = e_t.scaled(sigma_h)?;
    check_len(h.len(), noise.len())?;
    let values = h
        .values
        .iter()
        .zip(e_t.values.iter().zip(&noise.values))
        .map(|(h, (e, n))| (h + sigma_h * n * e) * FRAC_1_SQRT_2)
        .collect();
    Ok(SpatialSignature {
        values,
        kind: SignatureKind::ScaledPerturbed,
        sigma_h: Some(sigma_h),
    })
}

/// Inverts [`perturb_signature`]: `√2·e_n ⊘ e_t − 1`, `None` where `e_t` is 0.
pub fn recover_chaotic_noise(
    e_n: &SpatialSignature,
    e_t: &SpatialSignature,
) -> Result<Vec<Option<Complex64>>> {
    check_len(e_n.len(), e_t.len())?;
    Ok(e_n
        .values
        .iter()
        .zip(&e_t.values)
        .map(|(n, t)| (t.norm_sqr() > 0.0).then(|| n * std::f64::consts::SQRT_2 / t - 1.0))
        .collect())
}

/// `|⟨a, b⟩| / (‖a‖·‖b‖)`.
pub fn signature_correlation(a: &SpatialSignature, b: &SpatialSignature) -> Result<f64> {
    check_len(a.len(), b.len())?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    let inner: Complex64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok((inner.norm() / (na * nb)).min(1.0))
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!(
            "signature lengths {a} and {b}"
        )));
    }
    Ok(())
}

/// `⟨u(c1), u(c2)⟩` for two unit ULA steering vectors of `m` elements.
pub(crate) fn ula_inner(m: usize, spacing: f64, c1: f64, c2: f64) -> Complex64 {
    let theta = 2.0 * PI * spacing * (c1 - c2);
    let z = Complex64::from_polar(1.0, theta);
    let one_minus = Complex64::new(1.0, 0.0) - z;
    if one_minus.norm() < 1e-4 {
        let mut acc = Complex64::default();
        let mut p = Complex64::new(1.0, 0.0);
        for _ in 0..m {
            acc += p;
            p *= z;
        }
        acc / m as f64
    } else {
        let zm = Complex64::from_polar(1.0, theta * m as f64);
        (Complex64::new(1.0, 0.0) - zm) / one_minus / m as f64
    }
}

/// A transmitting or receiving planar array: anything that yields a unit
/// signature per direction.
pub trait ArrayResponse: Sync {
    fn element_count(&self) -> usize;

    fn kind(&self) -> SignatureKind;

    /// Writes the unit signature towards `dir` into `out` (length
    /// [`element_count`](Self::element_count)).
    fn response_into(&self, dir: Direction, out: &mut [Complex64]);

    fn response(&self, dir: Direction) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.element_count()];
        self.response_into(dir, &mut out);
        out
    }
}

/// An unmodified half-wavelength planar array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanarArray {
    pub h_count: usize,
    pub v_count: usize,
}

impl PlanarArray {
    pub fn new(h_count: usize, v_count: usize) -> Result<Self> {
        if h_count == 0 || v_count == 0 {
            return Err(invalid("planar array needs at least one element per edge"));
        }
        Ok(Self { h_count, v_count })
    }

    /// The factorisation `h × v = n` with `h ≥ v` and `h/v` smallest.
    pub fn most_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("planar array needs at least one element"));
        }
        let mut v = (n as f64).sqrt() as usize;
        while v > 1 && !n.is_multiple_of(v) {
            v -= 1;
        }
        Self::new(n / v.max(1), v.max(1))
    }

    /// `⟨e(d1), e(d2)⟩` in closed form.
    pub fn inner(&self, d1: Direction, d2: Direction) -> Complex64 {
        ula_inner(
            self.h_count,
            HALF_WAVELENGTH,
            d1.horizontal_cosine(),
            d2.horizontal_cosine(),
        ) * ula_inner(
            self.v_count,
            HALF_WAVELENGTH,
            d1.vertical_cosine(),
            d2.vertical_cosine(),
        )
    }
}

impl ArrayResponse for PlanarArray {
    fn element_count(&self) -> usize {
        self.h_count * self.v_count
    }

    fn kind(&self) -> SignatureKind {
        SignatureKind::NominalUnit
    }

    fn response_into(&self, dir: Direction, out: &mut [Complex64]) {
        let mut h = vec![Complex64::default(); self.h_count];
        let mut v = vec![Complex64::default(); self.v_count];
        ula_into(HALF_WAVELENGTH, dir.horizontal_cosine(), &mut h);
        ula_into(HALF_WAVELENGTH, dir.vertical_cosine(), &mut v);
        for (i, hx) in h.iter().enumerate() {
            for (j, vy) in v.iter().enumerate() {
                out[i * self.v_count + j] = hx * vy;
            }
        }
    }
}

/// A chaotic array: nominal planar response perturbed by the device's `h̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaoticArray {
    pub layout: PlanarArray,
    /// `(1 + h̃)/√2`, precomputed.
    weights: Vec<Complex64>,
}

impl ChaoticArray {
    pub fn new(layout: PlanarArray, noise: &ChaoticNoise) -> Result<Self> {
        check_len(layout.element_count(), noise.len())?;
        Ok(Self {
            layout,
            weights: noise
                .values
                .iter()
                .map(|h| (1.0 + h) * FRAC_1_SQRT_2)
                .collect(),
        })
    }
}

impl ArrayResponse for ChaoticArray {
    fn element_count(&self) -> usize {
        self.layout.element_count()
    }

    fn kind(&self) -> SignatureKind {
        SignatureKind::PerturbedUnit
    }

    fn response_into(&self, dir: Direction, out: &mut [Complex64]) {
        self.layout.response_into(dir, out);
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o *= w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn ula_single_element_and_broadside() {
        let s = ula_unit_signature(1, 0.5, 0.37).unwrap();
        assert_eq!(s.values, vec![Complex64::new(1.0, 0.0)]);
        let s = ula_unit_signature(4, 0.5, 0.0).unwrap();
        assert!(s
            .values
            .iter()
            .all(|v| close(*v, Complex64::new(0.5, 0.0), 1e-15)));
        assert!(ula_unit_signature(0, 0.5, 0.0).is_err());
        assert!(ula_unit_signature(3, 0.0, 0.0).is_err());
    }

    #[test]
    fn ula_endfire_alternates_sign() {
        let s = ula_unit_signature(8, 0.5, 1.0).unwrap();
        let a = 1.0 / 8f64.sqrt();
        for (k, v) in s.values.iter().enumerate() {
            let expect = if k % 2 == 0 { a } else { -a };
            assert!(close(*v, Complex64::new(expect, 0.0), 1e-14), "{k}: {v}");
        }
    }

    #[test]
    fn planar_cases() {
        let s = planar_unit_signature(1, 1, Direction::new(1.0, 0.3).unwrap()).unwrap();
        assert!(close(s.values[0], Complex64::new(1.0, 0.0), 1e-15));
        let s = planar_unit_signature(4, 4, Direction::BROADSIDE).unwrap();
        assert!(s
            .values
            .iter()
            .all(|v| close(*v, Complex64::new(0.25, 0.0), 1e-15)));
        let d = Direction::new(PI / 2.0, 0.0).unwrap();
        let s = planar_unit_signature(2, 2, d).unwrap();
        let h = ula_unit_signature(2, 0.5, 1.0).unwrap();
        let v = ula_unit_signature(2, 0.5, 0.0).unwrap();
        let expect = kron(&h.values, &v.values);
        for (a, b) in s.values.iter().zip(&expect) {
            assert!(close(*a, *b, 1e-15));
        }
    }

    #[test]
    fn direction_bounds() {
        assert!(Direction::new(PI, 0.0).is_err());
        assert!(Direction::new(-PI, PI / 2.0).is_ok());
        assert!(Direction::new(0.0, 1.6).is_err());
    }

    #[test]
    fn perturbation_special_cases() {
        let e_t = planar_unit_signature(2, 2, Direction::new(0.4, -0.2).unwrap()).unwrap();
        let zero = ChaoticNoise {
            seed: 0,
            values: vec![Complex64::default(); 4],
        };
        let e_n = perturb_signature(&e_t, &zero).unwrap();
        for (n, t) in e_n.values.iter().zip(&e_t.values) {
            assert!(close(*n, t * FRAC_1_SQRT_2, 1e-16));
        }
        let shift = Complex64::new(std::f64::consts::SQRT_2 - 1.0, 0.0);
        let ident = ChaoticNoise {
            seed: 0,
            values: vec![shift; 4],
        };
        let e_n = perturb_signature(&e_t, &ident).unwrap();
        for (n, t) in e_n.values.iter().zip(&e_t.values) {
            assert!(close(*n, *t, 1e-15));
        }
        let short = ChaoticNoise::generate(3, 1);
        assert!(perturb_signature(&e_t, &short).is_err());
    }

    #[test]
    fn unit_form_matches_scaled_form() {
        let e_t = planar_unit_signature(4, 4, Direction::new(-1.1, 0.7).unwrap()).unwrap();
        let noise = ChaoticNoise::generate(16, 9);
        let unit = perturb_signature(&e_t, &noise).unwrap();
        let scaled = scaled_perturbed_signature(&e_t, &noise, 2.5).unwrap();
        for (u, s) in unit.values.iter().zip(&scaled.values) {
            assert!(close(u * 2.5, *s, 1e-14));
        }
    }

    #[test]
    fn mean_perturbed_energy_is_one() {
        let e_t = planar_unit_signature(4, 4, Direction::new(0.3, 0.1).unwrap()).unwrap();
        let n = 100_000;
        let energies: Vec<f64> = (0..n)
            .map(|i| {
                let noise = ChaoticNoise::generate(16, i);
                perturb_signature(&e_t, &noise).unwrap().norm().powi(2)
            })
            .collect();
        let mean = energies.iter().sum::<f64>() / n as f64;
        let var = energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn correlation_edges() {
        let a = planar_unit_signature(2, 2, Direction::new(0.3, 0.1).unwrap()).unwrap();
        assert!((signature_correlation(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let basis = |i: usize| SpatialSignature {
            values: (0..4)
                .map(|k| Complex64::new((k == i) as u8 as f64, 0.0))
                .collect(),
            kind: SignatureKind::NominalUnit,
            sigma_h: None,
        };
        assert_eq!(signature_correlation(&basis(0), &basis(2)).unwrap(), 0.0);
        let zero = SpatialSignature {
            values: vec![Complex64::default(); 4],
            ..basis(0)
        };
        assert!(matches!(
            signature_correlation(&zero, &a),
            Err(Error::UndefinedCorrelation)
        ));
    }

    #[test]
    fn most_square_factorisations() {
        assert_eq!(
            PlanarArray::most_square(512).unwrap(),
            PlanarArray {
                h_count: 32,
                v_count: 16
            }
        );
        assert_eq!(
            PlanarArray::most_square(16).unwrap(),
            PlanarArray {
                h_count: 4,
                v_count: 4
            }
        );
        assert_eq!(
            PlanarArray::most_square(128).unwrap(),
            PlanarArray {
                h_count: 16,
                v_count: 8
            }
        );
        assert_eq!(
            PlanarArray::most_square(7).unwrap(),
            PlanarArray {
                h_count: 7,
                v_count: 1
            }
        );
    }

    #[test]
    fn closed_form_inner_product_matches_explicit_vectors() {
        let arr = PlanarArray::new(32, 16).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..50 {
            let (d1, d2) = (Direction::random(&mut rng), Direction::random(&mut rng));
            let (a, b) = (arr.response(d1), arr.response(d2));
            let explicit: Complex64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
            assert!(close(arr.inner(d1, d2), explicit, 1e-12));
            assert!(close(arr.inner(d1, d1), Complex64::new(1.0, 0.0), 1e-12));
        }
    }

    proptest! {
        #[test]
        fn steering_vectors_have_unit_norm(h in 1usize..20, v in 1usize..20, az in -std::f64::consts::PI..std::f64::consts::PI, el in -std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2) {
            let s = planar_unit_signature(h, v, Direction::new(az, el).unwrap()).unwrap();
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn perturbation_is_linear_and_invertible(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let e_t = planar_unit_signature(3, 2, Direction::new(0.9, -0.4).unwrap()).unwrap();
            let noise = ChaoticNoise::generate(6, seed);
            let c = Complex64::new(re, im);
            let scaled_in = SpatialSignature { values: e_t.values.iter().map(|v| v * c).collect(), ..e_t.clone() };
            let lhs = perturb_signature(&scaled_in, &noise).unwrap();
            let rhs = perturb_signature(&e_t, &noise).unwrap();
            for (l, r) in lhs.values.iter().zip(&rhs.values) {
                prop_assert!((l - r * c).norm() < 1e-12);
            }
            let back = recover_chaotic_noise(&rhs, &e_t).unwrap();
            for (b, h) in back.iter().zip(&noise.values) {
                prop_assert!((b.unwrap() - h).norm() < 1e-12);
            }
        }
    }
}
