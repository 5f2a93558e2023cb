use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use arraymetrics::channel::SnrReference;
use arraymetrics::geometry::render_geometry;
use arraymetrics::montecarlo::{
    run_curve, save_csv, Engine, ExperimentConfig, RateCurve, Scenario,
};
use arraymetrics::registry::{write_atomic, DeviceProfile, Registry};
use arraymetrics::{Error, Result};

#[derive(Parser)]
#[command(
    name = "arraymetrics",
    version,
    about = "Chaotic antenna-array authentication: enrollment and Monte Carlo runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a device identity and add it to a registry file.
    Enroll(EnrollArgs),
    /// Write the SVG drawing of an enrolled device's array.
    RenderGeometry(RenderArgs),
    /// Run a Monte Carlo experiment and write its rate curves as CSV.
    Simulate(SimulateArgs),
    /// List the devices held in a registry file.
    ShowRegistry(ShowArgs),
}

#[derive(Args)]
struct EnrollArgs {
    #[arg(long)]
    registry: PathBuf,
    #[arg(long, default_value_t = 4)]
    h_count: usize,
    #[arg(long, default_value_t = 4)]
    v_count: usize,
    #[arg(long, default_value_t = 64)]
    t_bauds: usize,
    /// Activation threshold: an antenna transmits a baud iff its draw is at least this.
    #[arg(long, default_value_t = 0.0)]
    nu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to `dev-<seed in hex>`.
    #[arg(long)]
    device_id: Option<String>,
    /// Enrollment timestamp, seconds since the Unix epoch.
    #[arg(long, default_value_t = 0)]
    enrolled_at: u64,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    registry: PathBuf,
    #[arg(long)]
    device_id: String,
    #[arg(long)]
    out: PathBuf,
    /// Accepted for uniformity; rendering draws nothing at random.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ShowArgs {
    #[arg(long)]
    registry: PathBuf,
    /// Print the registry document instead of a table.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SnrReferenceArg {
    FrameEnergy,
    PerSample,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Compressed,
    FullFrame,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON experiment configuration; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `miss`, `fa_noise` or `intruder`.
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Comma-separated values or `start:stop:step`, in dB.
    #[arg(long)]
    snr_grid: Option<String>,
    /// One curve per value; comma-separated.
    #[arg(long, value_delimiter = ',')]
    m_active: Vec<usize>,
    /// One curve per value; comma-separated.
    #[arg(long, value_delimiter = ',')]
    pfa: Vec<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    n_seraph: Option<usize>,
    #[arg(long)]
    t_bauds: Option<usize>,
    #[arg(long)]
    path_count: Option<usize>,
    #[arg(long)]
    enrolled_count: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    sigma_h: Option<f64>,
    #[arg(long)]
    probe_count: Option<usize>,
    #[arg(long, value_enum)]
    snr_reference: Option<SnrReferenceArg>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Intruder reuses the enrolled device's signature and pilot.
    #[arg(long)]
    clone_intruder: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Enroll(a) => enroll(a),
        Command::RenderGeometry(a) => render(a),
        Command::Simulate(a) => simulate(a),
        Command::ShowRegistry(a) => show(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn enroll(a: EnrollArgs) -> Result<()> {
    let mut registry = Registry::load_or_new(&a.registry)?;
    let id = a
        .device_id
        .unwrap_or_else(|| format!("dev-{:016x}", a.seed));
    let profile = DeviceProfile::generate(
        id.clone(),
        a.h_count,
        a.v_count,
        a.t_bauds,
        a.nu,
        a.seed,
        a.enrolled_at,
    )?;
    registry.enroll(profile)?;
    registry.save(&a.registry)?;
    println!("{id}");
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let registry = Registry::load(&a.registry)?;
    let svg = render_geometry(&registry.get(&a.device_id)?.geometry);
    write_atomic(&a.out, svg.as_bytes())
}

fn show(a: ShowArgs) -> Result<()> {
    let registry = Registry::load(&a.registry)?;
    if a.json {
        println!("{}", registry.to_json()?);
        return Ok(());
    }
    println!(
        "{:<24} {:>7} {:>6} {:>6} {:>12}",
        "device_id", "array", "bauds", "nu", "enrolled_at"
    );
    for d in registry.devices() {
        let p = &d.geometry.params;
        println!(
            "{:<24} {:>7} {:>6} {:>6} {:>12}",
            d.device_id,
            format!("{}x{}", p.h_count, p.v_count),
            d.pilot_config.t_bauds,
            d.pilot_config.activation_threshold,
            d.enrolled_at
        );
    }
    println!(
        "{} device(s), schema version {}",
        registry.len(),
        registry.version
    );
    Ok(())
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |s: &str| Error::InvalidParameter(format!("bad SNR grid `{text}`: {s}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(&e.to_string()));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(bad("need start <= stop and a positive step"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + i as f64 * step).collect())
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(bad("expected `a,b,c` or `start:stop:step`")),
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut base = match &a.config {
        Some(path) => serde_json::from_str::<ExperimentConfig>(&fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = a.scenario {
        base.scenario = s;
    }
    if let Some(g) = &a.snr_grid {
        base.snr_grid_db = parse_grid(g)?;
    }
    if let Some(v) = a.trials {
        base.trials_per_point = v;
    }
    if let Some(v) = a.seed {
        base.master_seed = v;
    }
    if let Some(v) = a.n_seraph {
        base.n_seraph = v;
    }
    if let Some(v) = a.t_bauds {
        base.t_bauds = v;
    }
    if let Some(v) = a.path_count {
        base.path_count = v;
    }
    if let Some(v) = a.enrolled_count {
        base.enrolled_count = v;
    }
    if let Some(v) = a.nu {
        base.activation_threshold = v;
    }
    if let Some(v) = a.sigma_h {
        base.sigma_h = v;
    }
    if let Some(v) = a.probe_count {
        base.probe_count = v;
    }
    if let Some(r) = a.snr_reference {
        base.snr_reference = match r {
            SnrReferenceArg::FrameEnergy => SnrReference::FrameEnergy,
            SnrReferenceArg::PerSample => SnrReference::PerSample,
        };
    }
    if let Some(e) = a.engine {
        base.engine = match e {
            EngineArg::Compressed => Engine::Compressed,
            EngineArg::FullFrame => Engine::FullFrame,
        };
    }
    if a.clone_intruder {
        base.clone_intruder = true;
    }
    if a.clone_intruder && base.scenario != Scenario::Intruder {
        return Err(Error::InvalidParameter(
            "--clone-intruder needs --scenario intruder".into(),
        ));
    }
    let m_values = if a.m_active.is_empty() {
        vec![base.m_active]
    } else {
        a.m_active.clone()
    };
    let pfa_values = if a.pfa.is_empty() {
        vec![base.pfa_target]
    } else {
        a.pfa.clone()
    };
    let mut configs = Vec::new();
    for &m in &m_values {
        for &pfa in &pfa_values {
            let cfg = ExperimentConfig {
                m_active: m,
                pfa_target: pfa,
                ..base.clone()
            };
            cfg.validate()?;
            configs.push(cfg);
        }
    }
    let curves = configs
        .iter()
        .map(|cfg| run_curve(cfg, a.threads))
        .collect::<Result<Vec<RateCurve>>>()?;
    save_csv(&curves, &a.out)?;
    print_summary(&curves);
    Ok(())
}

fn print_summary(curves: &[RateCurve]) {
    for c in curves {
        let cfg = &c.config;
        println!(
            "{}  m_active={} n_seraph={} pfa={} trials/point={} seed={}",
            c.scenario,
            cfg.m_active,
            cfg.n_seraph,
            cfg.pfa_target,
            cfg.trials_per_point,
            cfg.master_seed
        );
        println!(
            "{:>8} {:>9} {:>10} {:>10} {:>10}",
            "snr_db", "events", "rate", "ci_low", "ci_high"
        );
        for p in &c.points {
            println!(
                "{:>8.2} {:>9} {:>10.5} {:>10.5} {:>10.5}",
                p.snr_db, p.events, p.rate, p.ci_low, p.ci_high
            );
        }
    }
}
