// Random pilot matrices with and without antenna gating.

use arraymetrics::pilot::{
    active_count_per_baud, generate_pilot_matrix, pilot_energy, PilotConfig,
};
use arraymetrics::Result;

pub fn run_example() -> Result<Vec<f64>> {
    let mut energies = Vec::new();
    for nu in [0.0, 0.5, 0.9] {
        let cfg = PilotConfig {
            m_antennas: 16,
            t_bauds: 64,
            activation_threshold: nu,
            seed: 11,
        };
        let x = generate_pilot_matrix(&cfg)?;
        let active = active_count_per_baud(&x);
        let mean_active = active.iter().sum::<usize>() as f64 / active.len() as f64;
        let energy = pilot_energy(&x);
        println!(
            "nu = {nu:.1}: {mean_active:5.2} active antennas per baud, ||X||_F^2 = {energy:7.2}"
        );
        energies.push(energy);
    }
    Ok(energies)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
