use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use fluxtorque_cli::cache::Cache;
use fluxtorque_cli::{run_job, CliError, JobConfig, RunOptions, DEFAULT_MATERIALS_CONFIG};

#[derive(Parser, Debug)]
#[command(name = "fluxtorque", version, about = "Nonequilibrium fluctuation-induced power, force and torque near a magnetised substrate")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Job configuration (JSON, unit-tagged values).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed for dynamics jobs (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Always recompute and do not store results.
    #[arg(long, global = true)]
    no_cache: bool,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Spectral densities on a frequency grid.
    Spectrum,
    /// Frequency-integrated power, force and torque.
    Totals,
    /// Totals over a range of distance, temperature, field or spin rate.
    Sweep,
    /// Surface-polariton dispersion traces.
    Dispersion,
    /// Langevin rotational dynamics.
    Dynamics,
    /// Dump the material database and derived parameters.
    Materials,
}

impl Command {
    fn kind(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Totals => "totals",
            Command::Sweep => "sweep",
            Command::Dispersion => "dispersion",
            Command::Dynamics => "dynamics",
            Command::Materials => "materials",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::config("--jobs", "must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("--jobs", e.to_string()))?;
    }
    let cfg = match (&cli.config, cli.command) {
        (Some(p), _) => JobConfig::load(p)?,
        (None, Command::Materials) => JobConfig::from_json(DEFAULT_MATERIALS_CONFIG)?,
        (None, _) => return Err(CliError::config("--config", "required for this subcommand")),
    };
    if cfg.job.kind() != cli.command.kind() {
        return Err(CliError::config(
            "job.kind",
            format!("config describes a `{}` job but the `{}` subcommand was given", cfg.job.kind(), cli.command.kind()),
        ));
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fluxtorque-out"));
    let opts = RunOptions {
        out_dir,
        cache: (!cli.no_cache).then(Cache::from_env),
        seed: cli.seed,
    };
    let report = run_job(&cfg, &opts)?;
    let files: Vec<String> = report.files.iter().map(|p| p.display().to_string()).collect();
    println!("{}", json!({"status": "ok", "cached": report.cached, "key": report.key, "files": files}));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"status": "error", "kind": e.kind(), "message": e.to_string()}));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
