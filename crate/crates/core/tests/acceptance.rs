// Exit criteria for the simulator. Each test prints one PASS/FAIL line and
// then asserts it. Run with `--nocapture` to see the lines.

use std::collections::BTreeMap;
use std::fs;
use std::process::Command;

use num_complex::Complex64;
use rand::Rng;

use arraymetrics::channel::{generate_scattering_channel, ChannelConfig, ReceivedFrame};
use arraymetrics::detector::{
    authenticate, correlate, evaluate, threshold_equidistant, DetectorConfig, MIN_PROBE_COUNT,
};
use arraymetrics::montecarlo::{
    nominal_crossover_db, run_curve, ExperimentConfig, RateCurve, Scenario,
};
use arraymetrics::pilot::{generate_pilot_matrix, pilot_energy, PilotConfig};
use arraymetrics::registry::{DeviceProfile, Registry};
use arraymetrics::seeding::{complex_gaussian, rng_from_seed};
use arraymetrics::signature::{ArrayResponse, ChaoticArray, ChaoticNoise, PlanarArray};
use arraymetrics::CMatrix;

fn verdict(id: &str, what: &str, pass: bool, detail: String) {
    println!(
        "{} {id} {what}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{id} {what}: {detail}");
}

fn se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn curve(cfg: ExperimentConfig) -> RateCurve {
    cfg.validate().unwrap();
    run_curve(&cfg, None).unwrap()
}

/// First grid SNR from which the rate stays at or below `limit`.
fn settles_at(c: &RateCurve, limit: f64) -> Option<f64> {
    let last_above = c.points.iter().rposition(|p| p.rate > limit);
    match last_above {
        Some(i) => c.points.get(i + 1).map(|p| p.snr_db),
        None => c.points.first().map(|p| p.snr_db),
    }
}

fn rates(c: &RateCurve) -> String {
    c.points
        .iter()
        .map(|p| format!("{}:{:.4}", p.snr_db, p.rate))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn c01_miss_pfa_0_001_settles_between_11_and_15_db() {
    let c = curve(ExperimentConfig {
        scenario: Scenario::Miss,
        m_active: 16,
        n_seraph: 512,
        pfa_target: 0.001,
        trials_per_point: 10_000,
        master_seed: 101,
        ..ExperimentConfig::default()
    });
    let at = settles_at(&c, 0.01);
    let pass = at.is_some_and(|s| (11.0..=15.0).contains(&s));
    verdict(
        "C01",
        "miss <= 0.01 from a point in [11, 15] dB onwards (M=16, pfa=0.001)",
        pass,
        format!("settles at {at:?} dB; {}", rates(&c)),
    );
}

fn miss_pfa_0_01(m_active: usize, seed: u64) {
    let c = curve(ExperimentConfig {
        scenario: Scenario::Miss,
        m_active,
        n_seraph: 512,
        pfa_target: 0.01,
        trials_per_point: 10_000,
        master_seed: seed,
        ..ExperimentConfig::default()
    });
    let best = c
        .points
        .iter()
        .filter(|p| (6.0..=10.0).contains(&p.snr_db))
        .map(|p| p.rate)
        .fold(f64::INFINITY, f64::min);
    verdict(
        "C02",
        &format!("miss <= 0.01 somewhere in [6, 10] dB (M={m_active}, pfa=0.01)"),
        best <= 0.01,
        format!(
            "lowest rate in window {best:.4}; settles at {:?} dB; model crossover {:.2} dB; {}",
            settles_at(&c, 0.01),
            nominal_crossover_db(0.01).unwrap(),
            rates(&c)
        ),
    );
}

#[test]
fn c02_miss_pfa_0_01_m16_reaches_one_percent_by_10_db() {
    miss_pfa_0_01(16, 102);
}

#[test]
fn c02_miss_pfa_0_01_m128_reaches_one_percent_by_10_db() {
    miss_pfa_0_01(128, 103);
}

#[test]
fn c03_noise_only_rate_holds_pfa_0_01_then_drops() {
    let pfa = 0.01;
    let trials = 100_000;
    let c = curve(ExperimentConfig {
        scenario: Scenario::FaNoise,
        pfa_target: pfa,
        trials_per_point: trials,
        master_seed: 104,
        ..ExperimentConfig::default()
    });
    let tol = 3.0 * se(pfa, trials);
    // the holding region must reach at least 2 dB short of the 10 dB crossover
    let held_to = c
        .points
        .iter()
        .take_while(|p| (p.rate - pfa).abs() <= tol)
        .last()
        .map(|p| p.snr_db);
    let holds = held_to.is_some_and(|s| s >= 8.0);
    let high: Vec<_> = c.points.iter().filter(|p| p.snr_db >= 15.0).collect();
    let drops = !high.is_empty() && high.iter().all(|p| p.rate < pfa - tol);
    verdict(
        "C03",
        "noise-only rate within 0.01 +/- 3 s.e. up to the crossover, below 0.01 - 3 s.e. from 15 dB",
        holds && drops,
        format!(
            "within tolerance through {held_to:?} dB (model crossover {:.2} dB), tol {tol:.5}; {}",
            nominal_crossover_db(pfa).unwrap(),
            rates(&c)
        ),
    );
}

#[test]
fn c04_noise_only_rate_holds_pfa_0_001_at_low_snr() {
    let pfa = 0.001;
    let trials = 1_000_000;
    let c = curve(ExperimentConfig {
        scenario: Scenario::FaNoise,
        snr_grid_db: vec![-10.0, -5.0, 0.0],
        pfa_target: pfa,
        trials_per_point: trials,
        master_seed: 105,
        ..ExperimentConfig::default()
    });
    let tol = 3.0 * se(pfa, trials);
    let pass = c.points.iter().all(|p| (p.rate - pfa).abs() <= tol);
    verdict(
        "C04",
        "noise-only rate within 0.001 +/- 3 s.e. at 10^6 trials",
        pass,
        format!("tol {tol:.6}; {}", rates(&c)),
    );
}

#[test]
fn c05_intruder_penetration_stays_below_two_percent() {
    let pfa = 0.01;
    let trials = 100_000;
    let cfg = ExperimentConfig {
        scenario: Scenario::Intruder,
        pfa_target: pfa,
        trials_per_point: trials,
        master_seed: 106,
        ..ExperimentConfig::default()
    };
    let intruder = curve(cfg.clone());
    let noise = curve(ExperimentConfig {
        scenario: Scenario::FaNoise,
        ..cfg
    });
    let bounded = intruder.points.iter().all(|p| p.rate <= 0.02);
    let low = intruder
        .points
        .iter()
        .filter(|p| p.snr_db <= 5.0)
        .map(|p| p.rate)
        .fold(f64::INFINITY, f64::min);
    let high = intruder
        .points
        .iter()
        .filter(|p| p.snr_db >= 15.0)
        .map(|p| p.rate)
        .fold(0.0, f64::max);
    let declines = high < low;
    let bump = intruder
        .points
        .iter()
        .zip(&noise.points)
        .filter(|(a, _)| (8.0..=12.0).contains(&a.snr_db))
        .map(|(a, b)| a.rate - b.rate)
        .fold(f64::NEG_INFINITY, f64::max);
    verdict(
        "C05",
        "intruder rate <= 0.02 everywhere and lower above the crossover (pfa=0.01)",
        bounded && declines,
        format!(
            "max {:.4}; low-SNR min {low:.4}; >=15 dB max {high:.4}; largest excess over noise-only in [8, 12] dB {bump:+.4}; {}",
            intruder.points.iter().map(|p| p.rate).fold(0.0, f64::max),
            rates(&intruder)
        ),
    );
}

fn tail_calibration(pfa: f64, seed: u64) {
    let trials = 100_000;
    let c = curve(ExperimentConfig {
        scenario: Scenario::FaNoise,
        snr_grid_db: vec![0.0],
        pfa_target: pfa,
        trials_per_point: trials,
        master_seed: seed,
        ..ExperimentConfig::default()
    });
    let rate = c.points[0].psi_fa_rate;
    let tol = 3.0 * se(pfa, trials);
    verdict(
        "C06",
        &format!("noise-only Pr(beta > psi_FA) = {pfa} +/- 3 s.e."),
        (rate - pfa).abs() <= tol,
        format!("{rate:.5} (tol {tol:.5})"),
    );
}

#[test]
fn c06_fa_threshold_tail_is_calibrated_at_0_01() {
    tail_calibration(0.01, 107);
}

#[test]
fn c06_fa_threshold_tail_is_calibrated_at_0_05() {
    tail_calibration(0.05, 108);
}

#[test]
fn c07_noise_estimate_is_unbiased_under_both_hypotheses() {
    let mut lines = Vec::new();
    let mut pass = true;
    for (scenario, seed) in [(Scenario::Miss, 109), (Scenario::FaNoise, 110)] {
        let c = curve(ExperimentConfig {
            scenario,
            snr_grid_db: vec![10.0],
            probe_count: 256,
            trials_per_point: 10_000,
            master_seed: seed,
            ..ExperimentConfig::default()
        });
        let ratio = c.points[0].noise_ratio_mean.unwrap();
        pass &= (ratio - 1.0).abs() <= 0.01;
        lines.push(format!("{scenario}: E[sigma2_hat/sigma2] = {ratio:.5}"));
    }
    verdict(
        "C07",
        "noise estimate within 1% of the truth (K=256)",
        pass,
        lines.join("; "),
    );
}

#[test]
fn c08_noiseless_frame_gives_twice_the_equidistant_threshold() {
    let mut rng = rng_from_seed(111);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let (h_count, v_count) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let t_bauds = rng.random_range(1..=12);
        let device =
            DeviceProfile::generate("neo", h_count, v_count, t_bauds, 0.0, 1000 + i, 0).unwrap();
        let channel = generate_scattering_channel(
            &ChannelConfig {
                n_seraph: rng.random_range(9..=48),
                path_count: rng.random_range(1..=8),
                sigma_h: rng.random_range(0.2..3.0),
                seed: rng.random(),
            },
            &device.array().unwrap(),
        )
        .unwrap();
        let y = ReceivedFrame {
            samples: channel.matrix.dot(&device.pilot.values),
            true_noise_variance: 0.0,
            snr_db: f64::INFINITY,
        };
        let sigma2 = rng.random_range(0.01..10.0);
        let rho = correlate(&device.pilot, &channel, &y).unwrap();
        let energy = pilot_frame_energy(&channel.matrix, &device.pilot.values);
        let r = evaluate(rho, energy, sigma2, 0.01).unwrap();
        let psi_e = threshold_equidistant(&device.pilot, &channel, sigma2).unwrap();
        worst = worst.max((r.beta - 2.0 * psi_e).abs() / (2.0 * psi_e));

        let mut registry = Registry::new();
        registry.enroll(device).unwrap();
        let channels = BTreeMap::from([("neo".to_owned(), channel)]);
        let cfg = DetectorConfig {
            fixed_noise_variance: Some(sigma2),
            probe_count: MIN_PROBE_COUNT,
            ..DetectorConfig::new(0.01)
        };
        let full = authenticate(&y, "neo", &registry, &channels, &cfg, &mut rng).unwrap();
        worst = worst.max((full.beta - 2.0 * full.psi_e).abs() / (2.0 * full.psi_e));
    }
    verdict(
        "C08",
        "beta = 2 psi_e on noiseless frames, 100 instances",
        worst <= 1e-10,
        format!("worst relative error {worst:.2e}"),
    );
}

fn pilot_frame_energy(h: &CMatrix, x: &CMatrix) -> f64 {
    h.dot(x).iter().map(|v| v.norm_sqr()).sum()
}

/// Mean and standard error of `‖H‖_F²/(N_s·M)` over `draws` channels, the
/// transmitter for draw `i` given by `tx(i)`.
fn channel_energy(
    draws: u64,
    sigma_h: f64,
    tx: impl Fn(u64) -> Box<dyn ArrayResponse>,
) -> (f64, f64) {
    let (n_seraph, m) = (512, 16);
    let (mut sum, mut sq) = (0.0, 0.0);
    for i in 0..draws {
        let h = generate_scattering_channel(
            &ChannelConfig {
                n_seraph,
                path_count: 32,
                sigma_h,
                seed: 112_000_000 + i,
            },
            tx(i).as_ref(),
        )
        .unwrap();
        let v = h.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>() / (n_seraph * m) as f64;
        sum += v;
        sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    (mean, ((sq / n - mean * mean) * n / (n - 1.0) / n).sqrt())
}

#[test]
fn c09_channel_energy_is_normalised() {
    let sigma_h: f64 = 1.3;
    let target = sigma_h * sigma_h;
    let layout = PlanarArray::new(4, 4).unwrap();
    // unit-norm transmit signatures in every direction
    let nominal = channel_energy(10_000, sigma_h, |_| Box::new(layout));
    // a chaotic signature has unit norm on average over h̃, so each draw
    // gets a fresh device
    let chaotic = channel_energy(10_000, sigma_h, |i| {
        Box::new(ChaoticArray::new(layout, &ChaoticNoise::generate(16, 112 + i)).unwrap())
    });
    let ok = |(mean, s): (f64, f64)| (mean - target).abs() <= 3.0 * s;
    verdict(
        "C09",
        "E[||H||_F^2]/(N_s M) = sigma_h^2 within 3 s.e.",
        ok(nominal) && ok(chaotic),
        format!(
            "target {target:.5}; nominal array {:.5} (s.e. {:.5}); fresh chaotic arrays {:.5} (s.e. {:.5})",
            nominal.0, nominal.1, chaotic.0, chaotic.1
        ),
    );
}

#[test]
fn c10_simulate_output_is_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_arraymetrics"))
            .args([
                "simulate",
                "--scenario",
                "miss",
                "--trials",
                "2000",
                "--seed",
                "113",
                "--threads",
                threads,
            ])
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        fs::read(out).unwrap()
    };
    let one = run("1");
    let four = run("4");
    verdict(
        "C10",
        "same seed, 1 vs 4 threads: byte-identical CSV",
        one == four,
        format!("{} bytes vs {} bytes", one.len(), four.len()),
    );
}

#[test]
fn c11_small_instances_match_loop_oracles() {
    let mut rng = rng_from_seed(114);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let tx = ChaoticArray::new(
            PlanarArray::new(2, 1).unwrap(),
            &ChaoticNoise::generate(2, i),
        )
        .unwrap();
        let h = generate_scattering_channel(
            &ChannelConfig {
                n_seraph: 3,
                path_count: 4,
                sigma_h: 1.0,
                seed: rng.random(),
            },
            &tx,
        )
        .unwrap();
        let x = generate_pilot_matrix(&PilotConfig {
            m_antennas: 2,
            t_bauds: 2,
            activation_threshold: rng.random_range(0.0..0.6),
            seed: rng.random(),
        })
        .unwrap();
        let y = ReceivedFrame {
            samples: CMatrix::from_shape_fn((3, 2), |_| complex_gaussian(&mut rng, 1.0)),
            true_noise_variance: 1.0,
            snr_db: 0.0,
        };
        let sigma2 = rng.random_range(0.1..4.0);

        // Re Σ_n Σ_t conj(Σ_m H[n,m] X[m,t]) y[n,t]
        let mut rho = 0.0;
        let mut energy = 0.0;
        for n in 0..3 {
            for t in 0..2 {
                let mut s = Complex64::default();
                for m in 0..2 {
                    s += h.matrix[[n, m]] * x.values[[m, t]];
                }
                rho += (s.conj() * y.samples[[n, t]]).re;
                energy += s.norm_sqr();
            }
        }
        let mut pilot = 0.0;
        for m in 0..2 {
            for t in 0..2 {
                pilot += x.values[[m, t]].norm_sqr();
            }
        }
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        worst = worst
            .max(rel(correlate(&x, &h, &y).unwrap(), rho))
            .max(rel(
                threshold_equidistant(&x, &h, sigma2).unwrap(),
                energy / (2.0 * sigma2),
            ))
            .max(rel(pilot_energy(&x), pilot));
    }
    verdict(
        "C11",
        "rho, psi_e and pilot energy match loop oracles (N_s=3, M=2, T=2)",
        worst <= 1e-12,
        format!("worst error {worst:.2e}"),
    );
}
