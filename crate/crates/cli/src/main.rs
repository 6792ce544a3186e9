use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use drivesim::analysis::{aggregate, run_analysis, summary_csv, AnalysisSpec};
use drivesim::engine::{run_suite, suite_csv, EngineConfig, EpisodeReport, Scorer};
use drivesim::metrics::EvalMode;
use drivesim::policy::PolicySpec;
use drivesim::procgen::{generate_suite, ProcGenConfig};
use drivesim::scenario::{parse_scenario, read_scenario_dir, serialize_scenario};
use drivesim::traffic::{AdversaryConfig, TrafficMode};

/// Deterministic closed-loop driving simulator and evaluation harness.
#[derive(Debug, Parser)]
#[command(name = "drivesim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a suite of procedurally generated scenarios.
    Generate {
        /// Generator config (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a policy over every scenario in a directory.
    Simulate(SimulateArgs),
    /// Recompute a report's Driving Score from its frames and check it.
    Score {
        #[arg(long)]
        report: PathBuf,
    },
    /// Run the experiments in an analysis spec and write the figure tables.
    Analyze {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Schema-check a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    OpenLoop,
    ClosedLoop,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TrafficArg {
    LogReplay,
    Idm,
    Adversarial,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Expert,
    ConstantVelocity,
    NoisyExpert,
    Lattice,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScorerArg {
    Native,
    TruncatedQ,
    TruncatedQReplan,
    Oracle,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario_dir: PathBuf,
    #[arg(long, value_enum, default_value = "closed-loop")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "log-replay")]
    traffic: TrafficArg,
    #[arg(long, value_enum, default_value = "expert")]
    policy: PolicyArg,
    #[arg(long, value_enum, default_value = "native")]
    scorer: ScorerArg,
    #[arg(long, default_value_t = 5)]
    replan_rate: usize,
    /// Simulation horizon in steps.
    #[arg(long, default_value_t = 80)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Base engine config (JSON); the flags above override it.
    #[arg(long)]
    engine_config: Option<PathBuf>,
    /// Adversary script and target (JSON), required with adversarial traffic.
    #[arg(long)]
    adversary: Option<PathBuf>,
    /// noisy-expert: lateral perturbation scale in meters.
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// noisy-expert: number of candidates.
    #[arg(long, default_value_t = 8)]
    candidates: usize,
    /// noisy-expert: acceleration offset in m/s².
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    drift: f64,
    /// noisy-expert: half-width of the per-candidate acceleration spread.
    #[arg(long, default_value_t = 0.0)]
    accel_spread: f64,
    /// lattice: comma-separated speeds in m/s.
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8")]
    speeds: Vec<f64>,
    /// lattice: comma-separated curvatures in 1/m.
    #[arg(long, value_delimiter = ',', default_value = "0", allow_hyphen_values = true)]
    curvatures: Vec<f64>,
}

/// Input problems exit 1; everything else exits 2.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Invalid>().is_some() {
        return 1;
    }
    if let Some(e) = err.downcast_ref::<drivesim::Error>() {
        return if e.is_validation() { 1 } else { 2 };
    }
    2
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn write_resolved<T: Serialize>(out: &Path, value: &T) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(out.join("resolved_config.json"), bytes)?;
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("BRIDGESIM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| invalid(format!("BRIDGESIM_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GenerateEcho<'a> {
    command: &'static str,
    config: &'a ProcGenConfig,
    n: usize,
    seed: u64,
}

fn generate(config: &Path, n: usize, seed: u64, out: &Path) -> anyhow::Result<()> {
    let cfg: ProcGenConfig = read_json(config)?;
    let suite = generate_suite(&cfg, n, seed)?;
    write_resolved(out, &GenerateEcho { command: "generate", config: &cfg, n, seed })?;
    for s in &suite {
        std::fs::write(out.join(format!("{}.json", s.id)), serialize_scenario(s)?)?;
    }
    println!("wrote {} scenarios to {}", suite.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct SimulateEcho<'a> {
    command: &'static str,
    scenario_dir: &'a Path,
    policy: &'a PolicySpec,
    engine: &'a EngineConfig,
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let mut cfg: EngineConfig = match &a.engine_config {
        Some(p) => read_json(p)?,
        None => EngineConfig::default(),
    };
    cfg.mode = match a.mode {
        ModeArg::OpenLoop => EvalMode::OpenLoop,
        ModeArg::ClosedLoop => EvalMode::ClosedLoop,
    };
    cfg.traffic = match a.traffic {
        TrafficArg::LogReplay => TrafficMode::LogReplay,
        TrafficArg::Idm => TrafficMode::Idm,
        TrafficArg::Adversarial => TrafficMode::Adversarial,
    };
    cfg.scorer = match a.scorer {
        ScorerArg::Native => Scorer::NativeBest,
        ScorerArg::TruncatedQ => Scorer::TruncatedQ,
        ScorerArg::TruncatedQReplan => Scorer::TruncatedQReplan,
        ScorerArg::Oracle => Scorer::OracleEpdms,
    };
    if let Some(p) = &a.adversary {
        cfg.adversary = Some(read_json::<AdversaryConfig>(p)?);
    }
    cfg.replan_rate = a.replan_rate;
    cfg.horizon_steps = a.horizon;
    cfg.seed = a.seed;
    let cfg = cfg.resolved();
    cfg.validate()?;
    let policy = match a.policy {
        PolicyArg::Expert => PolicySpec::Expert,
        PolicyArg::ConstantVelocity => PolicySpec::ConstantVelocity,
        PolicyArg::NoisyExpert => PolicySpec::NoisyExpert {
            sigma: a.sigma,
            n: a.candidates,
            drift: a.drift,
            accel_spread: a.accel_spread,
        },
        PolicyArg::Lattice => PolicySpec::Lattice {
            speeds: a.speeds.clone(),
            curvatures: a.curvatures.clone(),
        },
    };
    policy.validate()?;
    let scenarios = read_scenario_dir(&a.scenario_dir)?;

    write_resolved(
        &a.out,
        &SimulateEcho { command: "simulate", scenario_dir: &a.scenario_dir, policy: &policy, engine: &cfg },
    )?;
    let reports_dir = a.out.join("reports");
    std::fs::create_dir_all(&reports_dir)?;
    let mut reports: Vec<EpisodeReport> = Vec::with_capacity(scenarios.len());
    let mut failed = 0;
    for (s, r) in scenarios.iter().zip(run_suite(&scenarios, &policy, &cfg)) {
        match r {
            Ok(r) => {
                std::fs::write(reports_dir.join(format!("{}.json", r.scenario_id)), r.to_json()?)?;
                reports.push(r);
            }
            Err(e) => {
                eprintln!("episode {} failed: {e}", s.id);
                failed += 1;
            }
        }
    }
    std::fs::write(a.out.join("suite.csv"), suite_csv(&reports)?)?;
    if !reports.is_empty() {
        let summary = aggregate(&reports)?;
        std::fs::write(a.out.join("summary.csv"), summary_csv(&summary)?)?;
        println!(
            "{} episodes, mean DS {:.2}, collisions {}",
            summary.episodes, summary.ds, summary.collisions
        );
    }
    if failed > 0 {
        bail!("{failed} of {} episodes failed", scenarios.len());
    }
    Ok(())
}

fn score(path: &Path) -> anyhow::Result<()> {
    let report: EpisodeReport = read_json(path)?;
    let ds = report.recompute_ds()?;
    if (ds - report.ds).abs() > 1e-9 {
        return Err(invalid(format!("DS mismatch: recorded {} but recomputed {ds}", report.ds)));
    }
    println!("ok: DS {ds:.4} over {} frames", report.frames.len());
    Ok(())
}

fn analyze(spec_path: &Path, out: &Path) -> anyhow::Result<()> {
    let spec: AnalysisSpec = read_json(spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let spec = spec.relative_to(base);
    spec.validate()?;
    write_resolved(out, &spec)?;
    let output = run_analysis(&spec)?;
    for p in output.write(out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn validate(path: &Path) -> anyhow::Result<()> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let s = parse_scenario(&bytes)?;
    println!("ok: {} ({} tracks, {} steps)", s.id, s.tracks.len(), s.step_count);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Generate { config, n, seed, out } => generate(&config, n, seed, &out),
        Command::Simulate(a) => simulate(&a),
        Command::Score { report } => score(&report),
        Command::Analyze { spec, out } => analyze(&spec, &out),
        Command::Validate { scenario } => validate(&scenario),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
