// How the size of the allowlist affects the miss rate: probes must avoid
// every enrolled device's expected signal.

use arraymetrics::montecarlo::{run_miss_curve, ExperimentConfig, Scenario};
use arraymetrics::Result;

pub fn run_example() -> Result<Vec<(usize, f64)>> {
    let mut rows = Vec::new();
    for enrolled in [1, 4, 16] {
        let cfg = ExperimentConfig {
            scenario: Scenario::Miss,
            snr_grid_db: vec![11.0],
            enrolled_count: enrolled,
            trials_per_point: 300,
            master_seed: 4,
            ..ExperimentConfig::default()
        };
        let curve = run_miss_curve(&cfg, None)?;
        let p = &curve.points[0];
        println!(
            "{enrolled:>3} enrolled: miss {:.4} [{:.4}, {:.4}], mean sigma^2 ratio {:.4}",
            p.rate,
            p.ci_low,
            p.ci_high,
            p.noise_ratio_mean.unwrap_or(f64::NAN)
        );
        rows.push((enrolled, p.rate));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
