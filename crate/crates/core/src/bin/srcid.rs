use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use srcid::harness::{
    run_identification, run_quasi_real, run_sweep, run_table, ExperimentConfig, HarnessError,
    HarnessResult, Method, SweepParam, DEFAULT_GAMMAS, OBSERVATION_FILE,
};

/// Identify the space-dependent source of a parabolic equation from
/// final-time or time-averaged observations.
#[derive(Parser)]
#[command(name = "srcid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (`key = value` lines); defaults to the base case.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// nonlocal | rhs | integral | multiplicative
    #[arg(long, global = true)]
    solver: Option<String>,

    /// Seed for the optional observation noise.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the observation from the forward problem.
    Forward,
    /// Recover the source from a stored observation.
    Invert {
        /// Observation file; defaults to `<out>/observation.txt`.
        #[arg(long)]
        observation: Option<PathBuf>,
    },
    /// Error decay for several source steepnesses.
    Table {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GAMMAS)]
        gammas: Vec<f64>,
    },
    /// Error decay and contraction rate against one parameter.
    Sweep {
        /// T | c | tau
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

fn load_config(common: &Common) -> HarnessResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
                path: path.clone(),
                source: e,
            })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(s) = &common.solver {
        cfg.solver = s.parse::<Method>()?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> HarnessResult<()> {
    let cfg = load_config(&cli.common)?;
    let out = cfg.out_dir.clone();
    match cli.command {
        Command::Forward => {
            let obs = run_quasi_real(&cfg, &out)?;
            println!("{}", obs.path.display());
        }
        Command::Invert { observation } => {
            let obs = observation.unwrap_or_else(|| out.join(OBSERVATION_FILE));
            let run = run_identification(&cfg, &obs, &out)?;
            for r in &run.records {
                println!(
                    "{:>3}  eps_inf {:.7}  eps_l2 {:.7}",
                    r.k, r.eps_inf, r.eps_l2
                );
            }
        }
        Command::Table { gammas } => {
            let table = run_table(&cfg, &gammas, &out)?;
            for (k, row) in table.eps_inf.iter().enumerate() {
                let cells: Vec<String> = row
                    .iter()
                    .map(|v| v.map_or("-".into(), |v| format!("{v:.7}")))
                    .collect();
                println!("{k}  {}", cells.join("  "));
            }
        }
        Command::Sweep { param, values } => {
            let param: SweepParam = param.parse()?;
            for row in run_sweep(&cfg, param, &values, &out)? {
                println!(
                    "{} = {}  rho {:.4}  measured {}  eps_inf {:.3e}",
                    param.name(),
                    row.value,
                    row.rho_theory,
                    row.measured_ratio.map_or("-".into(), |r| format!("{r:.4}")),
                    row.final_eps_inf
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.common.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
