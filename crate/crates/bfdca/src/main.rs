use std::path::PathBuf;
use std::process::ExitCode;

use bfdca::config::ExperimentConfig;
use bfdca::curves::{curves, parse_trace_arg};
use bfdca::selfcheck::selfcheck;
use bfdca::{data, run, CliError, Result};
use clap::{Args, Parser, Subcommand};

/// Bilevel hyperparameter selection for CS-MRI restoration.
#[derive(Parser)]
#[command(name = "bfdca", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the mask, noisy k-space data and manifest.
    Prepare(ConfigArgs),
    /// Run a method on a prepared dataset.
    Run(ConfigArgs),
    /// Merge traces into long-format curve data.
    Curves {
        /// Traces as `name=path` or plain paths.
        #[arg(required = true)]
        traces: Vec<String>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Check operator and solver invariants on small random instances.
    Selfcheck {
        #[arg(long, default_value_t = 8)]
        size: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    repeat: Option<String>,
    #[arg(long)]
    size: Option<String>,
    #[arg(long)]
    rate: Option<String>,
    #[arg(long)]
    noise_kind: Option<String>,
    #[arg(long)]
    noise_level: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    /// Any other key, as `key=value`; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.set {
            cfg.apply_override(kv)?;
        }
        let flags = [
            ("method", &self.method),
            ("seed", &self.seed),
            ("out", &self.out),
            ("repeat", &self.repeat),
            ("size", &self.size),
            ("rate", &self.rate),
            ("noise_kind", &self.noise_kind),
            ("noise_level", &self.noise_level),
            ("tol", &self.tol),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(args) => {
            let cfg = args.load()?;
            let manifest = data::prepare(&cfg)?;
            println!(
                "prepared {} in {}: n = {}, m = {}, frames = {}",
                manifest["config"]["source"].as_str().unwrap_or("?"),
                cfg.out.display(),
                manifest["n"],
                manifest["m"],
                manifest["frames"]
            );
        }
        Command::Run(args) => {
            let cfg = args.load()?;
            let summary = run::run(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
        }
        Command::Curves { traces, output } => {
            let parsed: Vec<_> = traces.iter().map(|t| parse_trace_arg(t)).collect();
            let n = curves(&parsed, &output)?;
            println!("wrote {n} rows to {}", output.display());
        }
        Command::Selfcheck { size, trials, seed } => {
            if size < 2 || !size.is_power_of_two() {
                return Err(CliError::usage("size must be a power of two, at least 2"));
            }
            let checks = selfcheck(size, trials, seed)?;
            let mut ok = true;
            for c in &checks {
                let tag = if c.passed() { "PASS" } else { "FAIL" };
                println!("{tag} {:<34} {:.3e} (tol {:.0e})", c.name, c.value, c.tol);
                ok &= c.passed();
            }
            if !ok {
                return Err(CliError::Solver(bfdca_core::Error::InvalidParameter {
                    name: "selfcheck",
                    reason: "an invariant check failed",
                }));
            }
        }
    }
    Ok(())
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
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
