//! The allowlist: what Seraph stores about each device at enrollment.
//!
//! On disk the registry is a JSON document
//!
//! ```json
//! {"version": 1, "devices": [{"device_id": "...", "pilot_config": {...},
//!   "geometry": {...}, "chaotic_noise": {...}, "pilot": {...}, "enrolled_at": 0}]}
//! ```
//!
//! with devices sorted by id. Every real that must survive a round trip
//! bit-exactly (vertex coordinates, `h̃`, pilot symbols) is written as the
//! 16-digit hex of its IEEE-754 bit pattern, complex values as `[re, im]`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::geometry::{generate_chaotic_geometry, ArrayGeometry, PerturbationParams};
use crate::pilot::{generate_pilot_matrix, PilotConfig, PilotMatrix};
use crate::seeding::{derive_seed, stream};
use crate::signature::{ChaoticArray, ChaoticNoise, PlanarArray};
use crate::CMatrix;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: String,
    pub pilot_config: PilotConfig,
    pub geometry: ArrayGeometry,
    pub chaotic_noise: ChaoticNoise,
    pub pilot: PilotMatrix,
    /// Unix seconds.
    pub enrolled_at: u64,
}

impl DeviceProfile {
    /// Draws geometry, `h̃` and pilot for an `h_count × v_count` array. The
    /// three draws use seeds derived from `seed`, so equal seeds give equal
    /// identities.
    pub fn generate(
        device_id: impl Into<String>,
        h_count: usize,
        v_count: usize,
        t_bauds: usize,
        activation_threshold: f64,
        seed: u64,
        enrolled_at: u64,
    ) -> Result<Self> {
        let params =
            PerturbationParams::new(h_count, v_count, derive_seed(seed, stream::GEOMETRY, 0));
        let geometry = generate_chaotic_geometry(&params)?;
        let m = geometry.element_count();
        let chaotic_noise = ChaoticNoise::generate(m, derive_seed(seed, stream::CHAOTIC_NOISE, 0));
        let pilot_config = PilotConfig {
            m_antennas: m,
            t_bauds,
            activation_threshold,
            seed: derive_seed(seed, stream::PILOT, 0),
        };
        let pilot = generate_pilot_matrix(&pilot_config)?;
        let profile = Self {
            device_id: device_id.into(),
            pilot_config,
            geometry,
            chaotic_noise,
            pilot,
            enrolled_at,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidProfile {
            id: self.device_id.clone(),
            reason,
        };
        if self.device_id.is_empty() {
            return Err(bad("empty device id".into()));
        }
        let m = self.geometry.element_count();
        if m != self.geometry.params.element_count() || m != self.geometry.displacements.len() {
            return Err(bad(format!(
                "geometry holds {m} elements for a {}x{} layout",
                self.geometry.params.h_count, self.geometry.params.v_count
            )));
        }
        if self.chaotic_noise.len() != m {
            return Err(bad(format!(
                "chaotic noise length {} vs {m} elements",
                self.chaotic_noise.len()
            )));
        }
        if self.pilot.antennas() != m {
            return Err(bad(format!(
                "pilot has {} rows vs {m} elements",
                self.pilot.antennas()
            )));
        }
        if self.pilot_config.m_antennas != m || self.pilot_config.t_bauds != self.pilot.bauds() {
            return Err(bad(format!(
                "pilot config {}x{} vs pilot {}x{}",
                self.pilot_config.m_antennas,
                self.pilot_config.t_bauds,
                self.pilot.antennas(),
                self.pilot.bauds()
            )));
        }
        self.pilot_config.validate().map_err(|e| bad(e.to_string()))
    }

    pub fn layout(&self) -> PlanarArray {
        PlanarArray {
            h_count: self.geometry.params.h_count,
            v_count: self.geometry.params.v_count,
        }
    }

    /// The device's transmit response: nominal layout perturbed by `h̃`.
    pub fn array(&self) -> Result<ChaoticArray> {
        ChaoticArray::new(self.layout(), &self.chaotic_noise)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    pub version: u32,
    devices: BTreeMap<String, DeviceProfile>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::new()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self {
            version: SCHEMA_VERSION,
            devices: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn get(&self, device_id: &str) -> Result<&DeviceProfile> {
        self.devices
            .get(device_id)
            .ok_or_else(|| Error::UnknownDevice(device_id.to_owned()))
    }

    pub fn contains(&self, device_id: &str) -> bool {
        self.devices.contains_key(device_id)
    }

    /// Profiles in device-id order.
    pub fn devices(&self) -> impl ExactSizeIterator<Item = &DeviceProfile> {
        self.devices.values()
    }

    pub fn ids(&self) -> impl ExactSizeIterator<Item = &str> {
        self.devices.keys().map(String::as_str)
    }

    pub fn enroll(&mut self, profile: DeviceProfile) -> Result<()> {
        profile.validate()?;
        if self.devices.contains_key(&profile.device_id) {
            return Err(Error::DuplicateDevice(profile.device_id));
        }
        self.devices.insert(profile.device_id.clone(), profile);
        Ok(())
    }

    /// `(device_id, H_i·X_i)` for every enrolled device, in id order.
    pub fn expected_signals(
        &self,
        channels: &BTreeMap<String, ChannelRealization>,
    ) -> Result<Vec<(String, CMatrix)>> {
        self.devices
            .values()
            .map(|p| {
                let h = channels
                    .get(&p.device_id)
                    .ok_or_else(|| Error::MissingChannel(p.device_id.clone()))?;
                if h.m_antennas() != p.pilot.antennas() {
                    return Err(Error::DimensionMismatch(format!(
                        "channel for `{}` has {} transmit columns, pilot has {} antennas",
                        p.device_id,
                        h.m_antennas(),
                        p.pilot.antennas()
                    )));
                }
                Ok((p.device_id.clone(), h.matrix.dot(&p.pilot.values)))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = RegistryRef {
            version: self.version,
            devices: self.devices.values().collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let found = raw
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Malformed("missing integer `version`".into()))?;
        if found != u64::from(SCHEMA_VERSION) {
            return Err(Error::SchemaVersion {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                expected: SCHEMA_VERSION,
            });
        }
        let doc: RegistryDoc =
            serde_json::from_value(raw).map_err(|e| Error::Malformed(e.to_string()))?;
        let mut reg = Registry::new();
        for p in doc.devices {
            reg.enroll(p).map_err(|e| Error::Malformed(e.to_string()))?;
        }
        Ok(reg)
    }

    /// Writes to a temporary file next to `path` and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// [`load`](Self::load), or an empty registry if `path` does not exist.
    pub fn load_or_new(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::from_json(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }
}

#[derive(Serialize)]
struct RegistryRef<'a> {
    version: u32,
    devices: Vec<&'a DeviceProfile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryDoc {
    #[allow(dead_code)]
    version: u32,
    devices: Vec<DeviceProfile>,
}

/// Replaces `path` with `bytes` so that readers see either the old or the
/// new content, never a partial write.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_scattering_channel, ChannelConfig};

    fn profile(id: &str, seed: u64) -> DeviceProfile {
        DeviceProfile::generate(id, 4, 4, 8, 0.3, seed, 1_700_000_000).unwrap()
    }

    #[test]
    fn enroll_and_duplicates() {
        let mut reg = Registry::new();
        assert!(reg.is_empty());
        reg.enroll(profile("neo", 1)).unwrap();
        assert_eq!(reg.len(), 1);
        assert!(matches!(
            reg.enroll(profile("neo", 2)),
            Err(Error::DuplicateDevice(_))
        ));
        assert!(matches!(reg.get("morpheus"), Err(Error::UnknownDevice(_))));
    }

    #[test]
    fn profile_invariants_are_checked() {
        let mut p = profile("neo", 1);
        p.chaotic_noise.values.pop();
        assert!(matches!(
            Registry::new().enroll(p),
            Err(Error::InvalidProfile { .. })
        ));
        let mut p = profile("neo", 1);
        p.pilot_config.t_bauds = 9;
        assert!(Registry::new().enroll(p).is_err());
    }

    #[test]
    fn same_seed_same_identity() {
        let a = profile("a", 5);
        let b = profile("b", 5);
        assert_eq!(a.chaotic_noise, b.chaotic_noise);
        assert_eq!(a.geometry, b.geometry);
        assert_eq!(a.pilot, b.pilot);
        assert_ne!(a.chaotic_noise, profile("c", 6).chaotic_noise);
    }

    #[test]
    fn hundred_profiles_round_trip_bit_exactly() {
        let mut reg = Registry::new();
        for i in 0..100 {
            reg.enroll(profile(&format!("dev-{i:03}"), i)).unwrap();
        }
        let back = Registry::from_json(&reg.to_json().unwrap()).unwrap();
        assert_eq!(back.len(), 100);
        for (a, b) in reg.devices().zip(back.devices()) {
            for (x, y) in a.chaotic_noise.values.iter().zip(&b.chaotic_noise.values) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
        assert_eq!(back, reg);
    }

    #[test]
    fn empty_registry_round_trip_and_versioning() {
        let reg = Registry::new();
        let text = reg.to_json().unwrap();
        assert_eq!(Registry::from_json(&text).unwrap(), reg);
        let tampered = text.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(
            Registry::from_json(&tampered),
            Err(Error::SchemaVersion {
                found: 2,
                expected: 1
            })
        ));
        assert!(matches!(
            Registry::from_json("{\"devices\": []}"),
            Err(Error::Malformed(_))
        ));
        assert!(Registry::from_json("not json").is_err());
    }

    #[test]
    fn save_and_load_preserve_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("allowlist.json");
        let mut reg = Registry::new();
        reg.enroll(profile("neo", 3)).unwrap();
        reg.save(&path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let back = Registry::load(&path).unwrap();
        assert_eq!(back, reg);
        back.save(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        assert!(Registry::load_or_new(&dir.path().join("missing.json"))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn expected_signals_follow_id_order() {
        let mut reg = Registry::new();
        let mut channels = BTreeMap::new();
        assert!(reg.expected_signals(&channels).unwrap().is_empty());
        for (i, id) in ["zeta", "alpha", "mid"].iter().enumerate() {
            let p = profile(id, i as u64);
            let cfg = ChannelConfig {
                n_seraph: 8,
                path_count: 3,
                sigma_h: 1.0,
                seed: i as u64,
            };
            channels.insert(
                id.to_string(),
                generate_scattering_channel(&cfg, &p.array().unwrap()).unwrap(),
            );
            reg.enroll(p).unwrap();
        }
        let out = reg.expected_signals(&channels).unwrap();
        let ids: Vec<_> = out.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["alpha", "mid", "zeta"]);
        // brute-force product for one device
        let p = reg.get("mid").unwrap();
        let h = &channels["mid"].matrix;
        let s = &out[1].1;
        for n in 0..8 {
            for t in 0..8 {
                let mut acc = num_complex::Complex64::default();
                for m in 0..16 {
                    acc += h[[n, m]] * p.pilot.values[[m, t]];
                }
                assert!((acc - s[[n, t]]).norm() < 1e-12);
            }
        }
        channels.remove("alpha");
        assert!(matches!(
            reg.expected_signals(&channels),
            Err(Error::MissingChannel(_))
        ));
    }
}
