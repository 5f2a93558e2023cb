// One authentication attempt each for the enrolled device, pure noise and
// an intruder, with the detector diagnostics as JSON.

use std::collections::BTreeMap;

use arraymetrics::channel::{
    generate_scattering_channel, noise_variance, received_samples, transmit, ChannelConfig,
    ReceivedFrame, SnrReference,
};
use arraymetrics::detector::{authenticate, DetectionResult, DetectorConfig};
use arraymetrics::pilot::{pilot_energy, PilotMatrix};
use arraymetrics::registry::{DeviceProfile, Registry};
use arraymetrics::seeding::rng_from_seed;
use arraymetrics::Result;

pub fn run_example() -> Result<Vec<DetectionResult>> {
    let mut registry = Registry::new();
    registry.enroll(DeviceProfile::generate("neo", 4, 4, 64, 0.0, 1, 0)?)?;
    let intruder = DeviceProfile::generate("smith", 4, 4, 64, 0.0, 2, 0)?;
    let neo = registry.get("neo")?;

    let cfg = |seed| ChannelConfig {
        n_seraph: 512,
        path_count: 32,
        sigma_h: 1.0,
        seed,
    };
    let h_neo = generate_scattering_channel(&cfg(10), &neo.array()?)?;
    let h_intruder = generate_scattering_channel(&cfg(11), &intruder.array()?)?;
    let channels = BTreeMap::from([("neo".to_owned(), h_neo.clone())]);

    let detector = DetectorConfig::new(0.01);
    let snr_db = 14.0;
    let mut rng = rng_from_seed(99);
    let silent = PilotMatrix::zeros(neo.pilot.antennas(), neo.pilot.bauds());

    let attempts = [
        (
            "neo",
            transmit(
                &h_neo,
                &neo.pilot,
                snr_db,
                SnrReference::FrameEnergy,
                &mut rng,
            )?,
        ),
        ("noise", {
            let var = noise_variance(
                snr_db,
                1.0,
                SnrReference::FrameEnergy,
                512,
                pilot_energy(&neo.pilot),
            );
            ReceivedFrame {
                samples: received_samples(&h_neo.matrix, &silent, var, &mut rng)?,
                true_noise_variance: var,
                snr_db,
            }
        }),
        (
            "intruder",
            transmit(
                &h_intruder,
                &intruder.pilot,
                snr_db,
                SnrReference::FrameEnergy,
                &mut rng,
            )?,
        ),
    ];
    let mut results = Vec::new();
    for (label, y) in &attempts {
        let r = authenticate(y, "neo", &registry, &channels, &detector, &mut rng)?;
        println!("{label:<9} {}", serde_json::to_string(&r)?);
        results.push(r);
    }
    Ok(results)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
