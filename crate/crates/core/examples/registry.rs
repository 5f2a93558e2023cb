// Enrolling devices, saving the allowlist and loading it back.

use arraymetrics::registry::{DeviceProfile, Registry};
use arraymetrics::Result;

pub fn run_example() -> Result<usize> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("allowlist.json");

    let mut registry = Registry::new();
    for (i, id) in ["neo", "trinity", "morpheus"].into_iter().enumerate() {
        registry.enroll(DeviceProfile::generate(
            id,
            4,
            4,
            64,
            0.0,
            100 + i as u64,
            1_700_000_000,
        )?)?;
    }
    registry.save(&path)?;

    let loaded = Registry::load(&path)?;
    assert_eq!(loaded, registry);
    for d in loaded.devices() {
        println!(
            "{:<10} h~[0] = {:.6}",
            d.device_id, d.chaotic_noise.values[0]
        );
    }
    let dup = DeviceProfile::generate("neo", 4, 4, 64, 0.0, 1, 0)?;
    if let Err(e) = registry.enroll(dup) {
        println!("second enrollment refused: {e}");
    }
    Ok(loaded.len())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
