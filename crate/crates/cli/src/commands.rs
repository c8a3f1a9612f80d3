//! Command-line definition and the subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use semimyopic_core::{generate_instance, mvi_k, run_episode, Error as CoreError, StreamKey};
use thiserror::Error;

use crate::config::{Config, ConfigError, RawConfig};
use crate::harness::{dependency_sweep, run_grid, EpisodeRow};
use crate::output::{self, RunManifest, VoiCurveRow};
use crate::verify::{run_suite, Fault, SuiteOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "semimyopic",
    version,
    about = "Semi-myopic value-of-information simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Configuration file (`key = value`) or a run manifest to replay.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides experiment.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides output.directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Scheme(s), comma separated; overrides scheme.family.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode and write its result row and trace.
    Episode,
    /// Intrinsic and net value of k measurements of one item.
    VoiCurve {
        #[arg(long)]
        item: usize,
        /// Largest k (defaults to problem.budget).
        #[arg(long)]
        k_max: Option<u32>,
    },
    /// Paired scheme comparison over the (sigma_o2, cost) grid.
    Grid,
    /// Scheme comparison across dependency strengths.
    SweepDependency,
    /// Run the oracle suite.
    Verify {
        /// Negative control: run with a deliberate accounting fault.
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<InjectedFault>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InjectedFault {
    CostAccounting,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(CoreError::KnownItemMeasurement { .. })
            | CliError::Core(CoreError::IndexOutOfRange { .. })
            | CliError::Core(CoreError::InvalidArgument(_)) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads `--config`, unwrapping a manifest's embedded config, and applies
/// the flag overrides.
fn load_raw(global: &GlobalArgs) -> Result<RawConfig, CliError> {
    let mut raw = match &global.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            if text.trim_start().starts_with('{') {
                let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| {
                    CliError::Usage(format!("{}: not a run manifest: {e}", path.display()))
                })?;
                RawConfig::parse(&manifest.config)?
            } else {
                RawConfig::parse(&text)?
            }
        }
        None => RawConfig::default(),
    };
    if let Some(seed) = global.seed {
        raw.set("experiment.seed", seed.to_string())?;
    }
    if let Some(out) = &global.out {
        raw.set("output.directory", out.display().to_string())?;
    }
    if let Some(scheme) = &global.scheme {
        raw.set("scheme.family", scheme.clone())?;
    }
    Ok(raw)
}

fn load_config(global: &GlobalArgs) -> Result<Config, CliError> {
    Ok(load_raw(global)?.resolve()?)
}

fn write_outputs(
    cfg: &Config,
    command: &str,
    files: &[(&str, Vec<u8>)],
) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(&cfg.directory);
    let names: Vec<&str> = files.iter().map(|(n, _)| *n).collect();
    let manifest = RunManifest::new(command, cfg.seed, cfg.to_text(), &names);
    output::write_run(&dir, &manifest, files).map_err(io_err(&dir))?;
    Ok(dir)
}

fn cmd_episode(global: &GlobalArgs) -> Result<i32, CliError> {
    let cfg = load_config(global)?;
    let spec = cfg.instance_spec()?;
    let model = cfg.model();
    let family = cfg.families[0];
    let key = StreamKey::new(cfg.seed);
    let instance = generate_instance(&spec, key)?;
    let ep = run_episode(
        &instance,
        family,
        &model,
        &spec.utility,
        cfg.mode,
        cfg.budget,
        key,
        &cfg.settings(),
    )?;
    let row = EpisodeRow {
        scheme: family.name().to_string(),
        n: cfg.n,
        budget: cfg.budget,
        sigma_o2: cfg.noise_variance,
        cost: cfg.cost,
        replicate: 0,
        seed: ep.seed,
        selected: ep.selected,
        best: ep.best,
        net_utility: ep.net_utility,
        regret: ep.regret,
        measurements: ep.measurements,
    };
    let trace = output::trace_text(&ep.trace, ep.selected);
    let csv =
        output::episodes_csv(std::slice::from_ref(&row)).map_err(io_err(Path::new("episode")))?;
    let dir = write_outputs(
        &cfg,
        "episode",
        &[
            (output::EPISODES_FILE, csv),
            (output::TRACE_FILE, trace.clone().into_bytes()),
        ],
    )?;
    print!("{trace}");
    println!(
        "scheme {} measurements {} selected {} net_utility {} regret {} -> {}",
        family,
        ep.measurements,
        ep.selected,
        ep.net_utility,
        ep.regret,
        dir.display()
    );
    Ok(EXIT_OK)
}

fn cmd_voi_curve(global: &GlobalArgs, item: usize, k_max: Option<u32>) -> Result<i32, CliError> {
    let cfg = load_config(global)?;
    let spec = cfg.instance_spec()?;
    let instance = generate_instance(&spec, StreamKey::new(cfg.seed))?;
    let k_max = k_max.unwrap_or(cfg.budget);
    if k_max == 0 {
        return Err(CliError::Usage("--k-max must be at least 1".into()));
    }
    let model = cfg.model();
    let settings = cfg.settings();
    let mut rows = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        let est = mvi_k(&instance.beliefs, &model, &spec.utility, item, k, &settings)?;
        rows.push(VoiCurveRow {
            k,
            intrinsic: est.intrinsic,
            cost: est.cost,
            net: est.net,
        });
    }
    let csv = output::voi_curve_csv(&rows).map_err(io_err(Path::new("voi curve")))?;
    print!("{}", String::from_utf8_lossy(&csv));
    write_outputs(&cfg, "voi-curve", &[(output::VOI_CURVE_FILE, csv)])?;
    Ok(EXIT_OK)
}

fn cmd_grid(global: &GlobalArgs) -> Result<i32, CliError> {
    let cfg = load_config(global)?;
    let grid = cfg.grid_spec()?;
    let dir = PathBuf::from(&cfg.directory);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let manifest = RunManifest::new(
        "grid",
        cfg.seed,
        cfg.to_text(),
        &[output::EPISODES_FILE, output::SUMMARY_FILE],
    );
    manifest.write(&dir).map_err(io_err(&dir))?;
    let out = run_grid(&grid, global.threads);
    let failed: Vec<_> = out.cells.iter().filter(|c| c.error.is_some()).collect();
    for c in &failed {
        eprintln!(
            "warning: cell sigma_o2={} cost={} failed: {}",
            c.sigma_o2,
            c.cost,
            c.error.as_deref().unwrap_or_default()
        );
    }
    for (name, bytes) in output::grid_files(&out).map_err(io_err(&dir))? {
        output::write_atomic(&dir.join(name), &bytes).map_err(io_err(&dir))?;
    }
    for c in out.cells.iter().filter(|c| c.error.is_none()) {
        for p in &c.pairs {
            println!(
                "{}-{} sigma_o2={} cost={} mean_diff={:.6} std_diff={:.6}",
                p.first, p.second, c.sigma_o2, c.cost, p.mean_diff, p.std_diff
            );
        }
    }
    if !failed.is_empty() && failed.len() == out.cells.len() {
        return Err(CliError::Failed("every grid cell failed".into()));
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(global: &GlobalArgs) -> Result<i32, CliError> {
    let cfg = load_config(global)?;
    let sweep = cfg.sweep_spec()?;
    if sweep.schemes.len() < 2 {
        return Err(CliError::Usage(
            "the dependency sweep compares two schemes (scheme.family)".into(),
        ));
    }
    let dir = PathBuf::from(&cfg.directory);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    RunManifest::new(
        "sweep-dependency",
        cfg.seed,
        cfg.to_text(),
        &[output::SWEEP_FILE, output::EPISODES_FILE],
    )
    .write(&dir)
    .map_err(io_err(&dir))?;
    let points = dependency_sweep(&sweep, global.threads);
    let sweep_csv = output::sweep_csv(&points).map_err(io_err(&dir))?;
    let episodes = output::sweep_episodes_csv(&points).map_err(io_err(&dir))?;
    output::write_atomic(&dir.join(output::SWEEP_FILE), &sweep_csv).map_err(io_err(&dir))?;
    output::write_atomic(&dir.join(output::EPISODES_FILE), &episodes).map_err(io_err(&dir))?;
    for pt in &points {
        match pt.utility_difference() {
            Some(d) => println!("ratio={} utility_diff={d:.6}", pt.ratio),
            None => println!("ratio={} failed", pt.ratio),
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(global: &GlobalArgs, fault: Option<InjectedFault>) -> Result<i32, CliError> {
    let raw = load_raw(global)?;
    // Only a seed is needed; a config, if given, must still be valid.
    let seed = if global.config.is_some() {
        raw.resolve()?.seed
    } else {
        global.seed.unwrap_or(0)
    };
    let opts = SuiteOptions {
        seed,
        fault: fault.map(|InjectedFault::CostAccounting| Fault::CostAccounting),
        ..SuiteOptions::default()
    };
    let report = run_suite(&opts);
    let text = report.to_text();
    print!("{text}");
    if let Some(out) = &global.out {
        fs::create_dir_all(out).map_err(io_err(out))?;
        output::write_atomic(&out.join(output::REPORT_FILE), text.as_bytes())
            .map_err(io_err(out))?;
    }
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Episode => cmd_episode(g),
        Command::VoiCurve { item, k_max } => cmd_voi_curve(g, item, k_max),
        Command::Grid => cmd_grid(g),
        Command::SweepDependency => cmd_sweep(g),
        Command::Verify { inject_fault } => cmd_verify(g, inject_fault),
    }
}
