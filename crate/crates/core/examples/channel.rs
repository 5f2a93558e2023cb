// Multipath channel from a 4×4 chaotic array to a 512-element receiver,
// and the average energy it carries.

use arraymetrics::channel::{
    generate_scattering_channel, ChannelConfig, DEFAULT_N_SERAPH, DEFAULT_PATH_COUNT,
};
use arraymetrics::detector::frame_energy;
use arraymetrics::signature::{ChaoticArray, ChaoticNoise, PlanarArray};
use arraymetrics::Result;

pub fn run_example() -> Result<f64> {
    let tx = ChaoticArray::new(PlanarArray::new(4, 4)?, &ChaoticNoise::generate(16, 5))?;
    let draws = 200;
    let mut total = 0.0;
    for seed in 0..draws {
        let cfg = ChannelConfig {
            n_seraph: DEFAULT_N_SERAPH,
            path_count: DEFAULT_PATH_COUNT,
            sigma_h: 1.0,
            seed,
        };
        let h = generate_scattering_channel(&cfg, &tx)?;
        total += frame_energy(&h.matrix) / (h.n_seraph() * h.m_antennas()) as f64;
    }
    let mean = total / draws as f64;
    println!("mean ||H||_F^2 / (N_s M) over {draws} draws: {mean:.3} (sigma_h^2 = 1)");
    Ok(mean)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
