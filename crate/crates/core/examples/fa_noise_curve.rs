// Acceptance rate when Seraph hears only noise. Below the crossover the
// false-alarm threshold holds the rate at its target; above it the
// equidistant threshold takes over and the rate falls away.

use arraymetrics::montecarlo::{
    nominal_crossover_db, run_fa_noise_curve, ExperimentConfig, RateCurve, Scenario,
};
use arraymetrics::Result;

pub fn run_example() -> Result<RateCurve> {
    let cfg = ExperimentConfig {
        scenario: Scenario::FaNoise,
        snr_grid_db: vec![-10.0, 0.0, 5.0, 10.0, 12.0, 15.0, 20.0],
        pfa_target: 0.05,
        trials_per_point: 2000,
        master_seed: 2,
        ..ExperimentConfig::default()
    };
    let curve = run_fa_noise_curve(&cfg, None)?;
    println!(
        "nominal crossover: {:.2} dB",
        nominal_crossover_db(cfg.pfa_target)?
    );
    println!("{:>7} {:>8} {:>10}", "snr_db", "rate", "beta>psiFA");
    for p in &curve.points {
        println!("{:>7.1} {:>8.4} {:>10.4}", p.snr_db, p.rate, p.psi_fa_rate);
    }
    Ok(curve)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
