// Missed-detection rate of an enrolled 16-antenna device against SNR, for
// two false-alarm targets. Trial counts are kept small so this runs in
// seconds; the `simulate` subcommand runs full-size curves.

use arraymetrics::montecarlo::{csv_string, run_miss_curve, ExperimentConfig, RateCurve, Scenario};
use arraymetrics::Result;

pub fn run_example() -> Result<Vec<RateCurve>> {
    let mut curves = Vec::new();
    for pfa in [0.01, 0.001] {
        let cfg = ExperimentConfig {
            scenario: Scenario::Miss,
            snr_grid_db: (0..=16).step_by(2).map(f64::from).collect(),
            m_active: 16,
            pfa_target: pfa,
            trials_per_point: 500,
            master_seed: 1,
            ..ExperimentConfig::default()
        };
        curves.push(run_miss_curve(&cfg, None)?);
    }
    print!("{}", csv_string(&curves)?);
    Ok(curves)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
