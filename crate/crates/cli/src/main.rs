use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quasilocal::experiment::{run, ExperimentConfig, ExperimentKind, Seeds};
use quasilocal::Error;

#[derive(Parser)]
#[command(name = "quasilocal", version, about = "Run quasi-local circuit experiments and write CSV/JSON artifacts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Flow residuals and spectra against exact diagonalization.
    Flow(RunArgs),
    /// Collar tails of flow circuits.
    Tails(RunArgs),
    /// Collar tails of sampled circuit families against the collar bound.
    FamilyTails(RunArgs),
    /// Cut entropies of eigenstates.
    Entropy(RunArgs),
    /// Largest diagonal coupling by range.
    Jscaling(RunArgs),
    /// Commutator lightcones.
    Lrb(RunArgs),
    /// Finite-time averages and their commutator residuals.
    Timeavg(RunArgs),
    /// Trotter errors against step count and gate norm.
    Trotter(RunArgs),
    /// Exact identities and inequalities.
    Bounds(RunArgs),
    /// Print the default configuration of an experiment.
    Defaults {
        /// Experiment name, e.g. `family-tails`.
        experiment: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: out/<experiment>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use seeds 1..=N.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Largest chain handled with dense matrices.
    #[arg(long)]
    dense_limit: Option<usize>,
}

fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

fn resolve(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| config_error("--config", format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::new(kind),
    };
    if config.experiment != kind {
        return Err(config_error(
            "experiment",
            format!("config is for `{}`, not `{}`", config.experiment.name(), kind.name()),
        ));
    }
    if let Some(n) = args.seeds {
        config.seeds = Seeds::Count(n);
    }
    if let Some(k) = args.threads {
        config.threads = k;
    }
    if let Some(d) = args.dense_limit {
        config.dense_limit = d;
    }
    config.validate()?;
    Ok(config)
}

/// 1 for configuration problems, 2 for failed runs and invariants.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidParameter { .. } | Error::DenseLimit { .. } | Error::TooManySites { .. } => 1,
        _ => 2,
    }
}

fn execute(kind: ExperimentKind, args: &RunArgs) -> Result<bool, Error> {
    let config = resolve(kind, args)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    std::fs::create_dir_all(&out).map_err(|e| config_error("--out", format!("{}: {e}", out.display())))?;
    let record = run(&config)?;
    record.write(&out)?;
    for check in &record.checks {
        println!("{} {}", if check.pass { "PASS" } else { "FAIL" }, check.name);
    }
    println!(
        "{}: {} rows in {:.1}s -> {}",
        kind.name(),
        record.table.as_ref().map_or(0, |t| t.rows.len()),
        record.wall_clock_seconds,
        out.display()
    );
    Ok(record.pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Flow(a) => (ExperimentKind::Flow, a),
        Command::Tails(a) => (ExperimentKind::Tails, a),
        Command::FamilyTails(a) => (ExperimentKind::FamilyTails, a),
        Command::Entropy(a) => (ExperimentKind::Entropy, a),
        Command::Jscaling(a) => (ExperimentKind::Jscaling, a),
        Command::Lrb(a) => (ExperimentKind::Lrb, a),
        Command::Timeavg(a) => (ExperimentKind::Timeavg, a),
        Command::Trotter(a) => (ExperimentKind::Trotter, a),
        Command::Bounds(a) => (ExperimentKind::Bounds, a),
        Command::Defaults { experiment } => {
            let Some(kind) = ExperimentKind::from_name(&experiment) else {
                eprintln!("error: unknown experiment `{experiment}`");
                return ExitCode::from(1);
            };
            return match ExperimentConfig::new(kind).to_toml() {
                Ok(s) => {
                    print!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match execute(kind, &args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
