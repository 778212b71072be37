use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quantlab::{run_experiment, CliError, ConfigFile, Overrides, Registry};

#[derive(Parser)]
#[command(name = "quantlab", version, about = "Numerical experiments for 1D quantization gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and/or flags.
    Run {
        /// Flat TOML config file (keys: experiment, n, m, eps, deltas, seed, t_end, out).
        config: Option<PathBuf>,
        #[arg(long)]
        experiment: Option<String>,
        /// Particle counts, e.g. 8,16,32.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Output directory (default: results).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print an experiment's claim, assertions, tables and defaults.
    Describe { name: String },
    /// List the available experiments.
    List,
}

fn unknown(name: &str, registry: &Registry) -> CliError {
    CliError::Usage(format!("unknown experiment '{name}' (available: {})", registry.names().join(", ")))
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let registry = Registry::builtin();
    match cli.command {
        Command::List => {
            for e in registry.iter() {
                println!("{:<22}{}", e.name(), e.claim());
            }
            Ok(true)
        }
        Command::Describe { name } => {
            let e = registry.get(&name).ok_or_else(|| unknown(&name, &registry))?;
            print!("{}", e.describe());
            Ok(true)
        }
        Command::Run { config, experiment, n, m, eps, deltas, seed, t_end, out } => {
            let file = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                    Some(ConfigFile::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?)
                }
                None => None,
            };
            let name = experiment
                .or_else(|| file.as_ref().map(|f| f.experiment.clone()))
                .ok_or_else(|| CliError::Usage("give a config file or --experiment".into()))?;
            let exp = registry.get(&name).ok_or_else(|| unknown(&name, &registry))?;
            let flags = Overrides { n, m, eps, deltas, seed, t_end };
            let mut settings = exp.defaults();
            if let Some(f) = &file {
                settings = settings.apply(&f.overrides);
            }
            settings = settings.apply(&flags);
            let out = out.or_else(|| file.and_then(|f| f.out)).unwrap_or_else(|| PathBuf::from("results"));

            let (summary, dir) = run_experiment(exp, &settings, &out)?;
            for a in &summary.assertions {
                println!("{} {:<32} value {:.6e}  bound {:.6e}", if a.pass { "PASS" } else { "FAIL" }, a.name, a.value, a.bound);
            }
            println!("{} in {:.2}s, artifacts in {}", summary.experiment, summary.runtime_seconds, dir.display());
            Ok(summary.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("quantlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
