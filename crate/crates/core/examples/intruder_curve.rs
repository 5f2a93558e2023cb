// Penetration rate of an intruder with its own random signature and pilot,
// next to a cloned intruder that copies Neo's identity exactly.

use arraymetrics::montecarlo::{run_intruder_curve, ExperimentConfig, RateCurve, Scenario};
use arraymetrics::Result;

pub fn run_example() -> Result<(RateCurve, RateCurve)> {
    let cfg = ExperimentConfig {
        scenario: Scenario::Intruder,
        snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
        pfa_target: 0.01,
        trials_per_point: 1000,
        master_seed: 3,
        ..ExperimentConfig::default()
    };
    let random = run_intruder_curve(&cfg, None)?;
    let clone = run_intruder_curve(
        &ExperimentConfig {
            clone_intruder: true,
            ..cfg.clone()
        },
        None,
    )?;
    println!("{:>7} {:>10} {:>10}", "snr_db", "random", "clone");
    for (r, c) in random.points.iter().zip(&clone.points) {
        println!("{:>7.1} {:>10.4} {:>10.4}", r.snr_db, r.rate, c.rate);
    }
    Ok((random, clone))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
