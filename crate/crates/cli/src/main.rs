use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dampkg::real::Precision;
use dampkg::ModelParams;
use dampkg_cli::{
    emit_plotdata, load_config, resolve_output_dir, run, run_sweep, CliError, RunConfig, Scenario, SweepConfig,
};

/// Experiments on two-soliton dynamics of the damped Klein-Gordon equation.
///
/// Exit codes: 0 success, 2 invalid configuration, 3 scenario failure,
/// 4 i/o error, 5 missing outputs.
#[derive(Parser)]
#[command(name = "dampkg", version)]
struct Cli {
    /// Output directory of the run (sweeps: parent directory).
    #[arg(long, global = true, env = "DAMPKG_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Size of the worker pool.
    #[arg(long, global = true, env = "DAMPKG_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct ModelArgs {
    /// Space dimension.
    #[arg(long = "N", default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 3.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams, CliError> {
        ModelParams::new(self.n, self.p, self.alpha).map_err(|e| CliError::ConfigInvalid(e.to_string()))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state and spectral constants as JSON.
    Constants {
        #[command(flatten)]
        model: ModelArgs,
        /// Also write the profile and eigenfunction as CSV.
        #[arg(long)]
        dump_profile: bool,
    },
    /// Interaction function on a range of distances.
    Interactions {
        #[command(flatten)]
        model: ModelArgs,
        /// `start:stop:step`
        #[arg(long, default_value = "8:16:2")]
        range: String,
    },
    /// Field simulation in one dimension.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Reduced parameter flow.
    Reduced {
        #[arg(long)]
        config: PathBuf,
    },
    /// Locate the persisting unstable coefficients.
    Shoot {
        /// Configuration file; flags override its shoot section.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "L")]
        l: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// `double` or `double_double`.
        #[arg(long, value_parser = parse_precision)]
        precision: Option<Precision>,
        #[arg(long)]
        t_accept: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Lipschitz probe of the persisting coefficients.
    Lipschitz {
        #[arg(long)]
        config: PathBuf,
    },
    /// Batch of runs from one file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Any scenario from a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Long-format plot tables for a finished run.
    Plotdata { run_dir: PathBuf },
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_range(s: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::ConfigInvalid(format!("range {s:?} is not start:stop:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<Vec<f64>, _>>().map_err(|_| bad())?;
    Ok((v[0], v[1], v[2]))
}

fn execute(config: &RunConfig, override_dir: Option<&Path>) -> Result<(), CliError> {
    let dir = resolve_output_dir(config, override_dir);
    let (manifest, summary) = run(config, &dir)?;
    let shown = if config.scenario == Scenario::Constants {
        serde_json::to_string_pretty(&summary)
    } else {
        serde_json::to_string_pretty(&serde_json::json!({
            "output_dir": dir,
            "files": manifest.files.iter().map(|f| &f.name).collect::<Vec<_>>(),
            "summary": summary,
        }))
    };
    println!("{}", shown.map_err(|e| CliError::Io(e.to_string()))?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
    }
    let out = cli.output_dir.as_deref();
    match cli.command {
        Command::Constants { model, dump_profile } => {
            let mut config = RunConfig::new(Scenario::Constants, model.params()?);
            config.numerics.ground_state.dump_profiles = dump_profile;
            execute(&config, out)
        }
        Command::Interactions { model, range } => {
            let mut config = RunConfig::new(Scenario::Interactions, model.params()?);
            let (r_min, r_max, r_step) = parse_range(&range)?;
            let i = &mut config.numerics.interactions;
            (i.r_min, i.r_max, i.r_step) = (r_min, r_max, r_step);
            execute(&config, out)
        }
        Command::Simulate { config } => execute(&load_config(&config, Some(Scenario::Simulate))?, out),
        Command::Reduced { config } => execute(&load_config(&config, Some(Scenario::Reduced))?, out),
        Command::Lipschitz { config } => execute(&load_config(&config, Some(Scenario::Lipschitz))?, out),
        Command::Run { config } => execute(&load_config(&config, None)?, out),
        Command::Shoot { config, l, delta, precision, t_accept, tol, seed } => {
            let mut config = match config {
                Some(path) => load_config(&path, Some(Scenario::Shoot))?,
                None => RunConfig::new(Scenario::Shoot, ModelParams::cubic_1d()),
            };
            let s = &mut config.numerics.shoot;
            s.l = l.unwrap_or(s.l);
            s.delta = delta.unwrap_or(s.delta);
            s.precision = precision.unwrap_or(s.precision);
            s.t_accept = t_accept.or(s.t_accept);
            s.tol = tol.or(s.tol);
            config.seed = seed.unwrap_or(config.seed);
            execute(&config, out)
        }
        Command::Sweep { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", config.display())))?;
            let sweep: SweepConfig =
                serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
            if cli.workers.is_none() {
                if let Some(n) = sweep.workers {
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build_global()
                        .map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
                }
            }
            let base = out.map(Path::to_path_buf).or(sweep.output_dir.clone()).unwrap_or_else(|| "runs/sweep".into());
            let entries = run_sweep(&sweep, &base)?;
            println!("{}", serde_json::to_string_pretty(&entries).map_err(|e| CliError::Io(e.to_string()))?);
            match entries.iter().find(|e| !e.ok) {
                Some(e) => Err(CliError::ScenarioFailed {
                    scenario: format!("sweep run {}", e.index),
                    message: e.message.clone().unwrap_or_default(),
                }),
                None => Ok(()),
            }
        }
        Command::Plotdata { run_dir } => {
            for path in emit_plotdata(&run_dir)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
