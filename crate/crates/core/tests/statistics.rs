mod common;

use arraymetrics::geometry::{generate_chaotic_geometry, validate_geometry, PerturbationParams};
use arraymetrics::montecarlo::{
    nominal_crossover_db, run_curve, Engine, Experiment, ExperimentConfig, Outcome, Scenario,
};
use arraymetrics::signature::{
    perturb_signature, planar_unit_signature, signature_correlation, ChaoticNoise, Direction,
};
use common::{binomial_se, ks_critical, ks_statistic, spearman_negative};

#[test]
fn ks_helper_edges() {
    let a = [0.3, 0.1, 0.2];
    assert_eq!(ks_statistic(&a, &a), 0.0);
    assert_eq!(ks_statistic(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
    assert!((ks_critical(100, 100, 0.05) - 1.358 * 0.02f64.sqrt()).abs() < 1e-3);
}

#[test]
fn spearman_helper_edges() {
    let x: Vec<f64> = (0..10).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| -v * v).collect();
    let (rho, p) = spearman_negative(&x, &y);
    assert!((rho + 1.0).abs() < 1e-12);
    assert!(p < 1e-6);
}

#[test]
fn random_geometries_stay_in_bounds() {
    let draws = 10_000;
    let mut crossed = 0usize;
    for seed in 0..draws {
        let geom = generate_chaotic_geometry(&PerturbationParams::new(4, 4, seed)).unwrap();
        let report = validate_geometry(&geom);
        assert_eq!(report.out_of_bounds(), 0, "seed {seed}");
        let direct = geom
            .elements
            .iter()
            .filter(|q| q.is_self_intersecting())
            .count();
        assert_eq!(report.self_intersecting(), direct);
        crossed += usize::from(direct > 0);
    }
    println!(
        "geometries with a self-intersecting element: {crossed}/{draws} ({:.4})",
        crossed as f64 / draws as f64
    );
}

#[test]
fn independent_signatures_correlate_at_one_half() {
    // ⟨e_n, e_n'⟩ = Σ|e_t|²(1 + h̃)*(1 + h̃')/2 has mean 1/2 and both norms
    // concentrate at 1, so the correlation concentrates at 1/2
    let e_t = planar_unit_signature(32, 16, Direction::new(0.7, -0.3).unwrap()).unwrap();
    let pairs = 1000u64;
    let corrs: Vec<f64> = (0..pairs)
        .map(|i| {
            let a = perturb_signature(&e_t, &ChaoticNoise::generate(512, 2 * i)).unwrap();
            let b = perturb_signature(&e_t, &ChaoticNoise::generate(512, 2 * i + 1)).unwrap();
            signature_correlation(&a, &b).unwrap()
        })
        .collect();
    let mean = corrs.iter().sum::<f64>() / pairs as f64;
    let max = corrs.iter().copied().fold(0.0, f64::max);
    println!("512-element signature correlation: mean {mean:.4}, max {max:.4}");
    assert!((mean - 0.5).abs() < 0.01, "{mean}");
    assert!(max < 0.7);
}

fn outcomes(cfg: &ExperimentConfig, trials: u64) -> Vec<Vec<Outcome>> {
    let exp = Experiment::new(cfg.clone()).unwrap();
    (0..trials).map(|i| exp.trial(i).unwrap()).collect()
}

#[test]
fn noise_estimate_ignores_the_enrolled_signal() {
    let base = ExperimentConfig {
        snr_grid_db: vec![10.0],
        trials_per_point: 10_000,
        ..ExperimentConfig::default()
    };
    let ratios = |scenario, seed| -> Vec<f64> {
        let cfg = ExperimentConfig {
            scenario,
            master_seed: seed,
            ..base.clone()
        };
        outcomes(&cfg, cfg.trials_per_point)
            .iter()
            .map(|o| o[0].noise_ratio.unwrap())
            .collect()
    };
    let h1 = ratios(Scenario::Miss, 11);
    let h0 = ratios(Scenario::FaNoise, 12);
    let d = ks_statistic(&h0, &h1);
    let crit = ks_critical(h0.len(), h1.len(), 0.01);
    println!("KS distance {d:.4}, 1% critical value {crit:.4}");
    assert!(d < crit);
}

#[test]
fn accepted_trials_clear_both_thresholds() {
    for scenario in [Scenario::Miss, Scenario::FaNoise, Scenario::Intruder] {
        let cfg = ExperimentConfig {
            scenario,
            snr_grid_db: vec![0.0, 8.0, 10.0, 12.0, 16.0],
            pfa_target: 0.05,
            trials_per_point: 2000,
            master_seed: 21,
            ..ExperimentConfig::default()
        };
        let mut fa_only = vec![0u64; cfg.snr_grid_db.len()];
        let mut combined = vec![0u64; cfg.snr_grid_db.len()];
        for trial in outcomes(&cfg, cfg.trials_per_point) {
            for (k, o) in trial.iter().enumerate() {
                let accepted = if scenario == Scenario::Miss {
                    !o.event
                } else {
                    o.event
                };
                assert_eq!(accepted, o.exceeds_psi_fa && o.exceeds_psi_e);
                fa_only[k] += u64::from(o.exceeds_psi_fa);
                combined[k] += u64::from(accepted);
            }
        }
        assert!(combined.iter().zip(&fa_only).all(|(c, f)| c <= f));
    }
}

#[test]
fn false_alarms_hold_their_target_below_the_crossover() {
    let pfa = 0.05;
    let crossover = nominal_crossover_db(pfa).unwrap();
    let cfg = ExperimentConfig {
        scenario: Scenario::FaNoise,
        snr_grid_db: vec![-10.0, -5.0, 0.0, 3.0, 20.0],
        pfa_target: pfa,
        trials_per_point: 20_000,
        master_seed: 31,
        ..ExperimentConfig::default()
    };
    let curve = run_curve(&cfg, None).unwrap();
    let tol = 3.0 * binomial_se(pfa, cfg.trials_per_point);
    for p in curve.points.iter().filter(|p| p.snr_db < crossover - 3.0) {
        assert!((p.rate - pfa).abs() <= tol, "{} dB: {}", p.snr_db, p.rate);
    }
    let high = curve.points.last().unwrap();
    assert!(
        high.rate <= pfa,
        "noise accepted at {} dB: {}",
        high.snr_db,
        high.rate
    );
}

#[test]
fn miss_rate_falls_with_snr() {
    let cfg = ExperimentConfig {
        scenario: Scenario::Miss,
        trials_per_point: 1000,
        master_seed: 41,
        ..ExperimentConfig::default()
    };
    let curve = run_curve(&cfg, None).unwrap();
    let snr: Vec<f64> = curve.points.iter().map(|p| p.snr_db).collect();
    let rate: Vec<f64> = curve.points.iter().map(|p| p.rate).collect();
    let (rho, p) = spearman_negative(&snr, &rate);
    println!("Spearman rho {rho:.3}, p {p:.2e}");
    assert!(rho <= 0.0 && p < 0.01);
}

#[test]
fn engines_agree_in_distribution() {
    // Same seed: same enrolled identities and channel draws; the engines
    // draw their noise differently. Small arrays keep explicit frames cheap.
    for scenario in [Scenario::Miss, Scenario::FaNoise, Scenario::Intruder] {
        let base = ExperimentConfig {
            scenario,
            snr_grid_db: vec![0.0, 6.0, 12.0],
            m_active: 4,
            n_seraph: 64,
            t_bauds: 16,
            path_count: 8,
            probe_count: 64,
            pfa_target: 0.1,
            trials_per_point: 3000,
            master_seed: 51,
            ..ExperimentConfig::default()
        };
        let fast = run_curve(&base, None).unwrap();
        let full = run_curve(
            &ExperimentConfig {
                engine: Engine::FullFrame,
                ..base.clone()
            },
            None,
        )
        .unwrap();
        for (a, b) in fast.points.iter().zip(&full.points) {
            let pooled = (a.events + b.events) as f64 / (a.trials + b.trials) as f64;
            let se =
                (pooled * (1.0 - pooled) * (1.0 / a.trials as f64 + 1.0 / b.trials as f64)).sqrt();
            let z = if se > 0.0 {
                (a.rate - b.rate) / se
            } else {
                0.0
            };
            assert!(
                z.abs() < 4.0,
                "{scenario} {} dB: {} vs {}",
                a.snr_db,
                a.rate,
                b.rate
            );
        }
    }
}
