use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gfrf::experiment::{
    export_priors, run_estimation_experiment, run_transient_experiment, verify::run_property_suite,
    ExperimentConfig,
};
use gfrf::{Error, Result};

#[derive(Parser)]
#[command(
    name = "gfrf",
    version,
    about = "GFRF estimation and second-order transient analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, estimate and tune; write GFRF and metrics files.
    Estimate(RunArgs),
    /// Decompose a second-order output into SS/T1/T2/T3 and check the identities.
    Transient(RunArgs),
    /// Run the seeded property suite.
    Verify(VerifyArgs),
    /// Dump the time and frequency domain prior covariances.
    ExportPriors(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as verify.json into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::from(e).context(format!("reading {}", args.config.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        config.reseed(seed);
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| {
            Error::InvalidSpec("no output directory: pass --out or set output_dir".into())
        })?;
    config.validate()?;
    Ok((config, out))
}

fn say(quiet: bool, line: impl AsRef<str>) {
    if !quiet {
        println!("{}", line.as_ref());
    }
}

/// `Ok(true)` when every reported check passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Estimate(args) => {
            let (config, out) = load(&args)?;
            let s = run_estimation_experiment(&config, &out)?;
            say(args.quiet, format!("parameters        {}", s.parameters));
            say(args.quiet, format!("output rows       {}", s.rows));
            say(
                args.quiet,
                format!("rank deficient    {}", s.rank_deficient),
            );
            say(
                args.quiet,
                format!("untuned rel error {:.6e}", s.untuned_relative_error),
            );
            say(
                args.quiet,
                format!("rel error         {:.6e}", s.relative_error),
            );
            say(
                args.quiet,
                format!("wrote {} files to {}", s.files.len(), out.display()),
            );
            Ok(true)
        }
        Command::Transient(args) => {
            let (config, out) = load(&args)?;
            let s = run_transient_experiment(&config, &out)?;
            for c in &s.checks {
                say(
                    args.quiet,
                    format!(
                        "{} {:<24} {:.3e} (tol {:.0e})",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.name,
                        c.value,
                        c.tolerance
                    ),
                );
            }
            say(
                args.quiet,
                format!("wrote {} files to {}", s.files.len(), out.display()),
            );
            Ok(s.all_passed)
        }
        Command::ExportPriors(args) => {
            let (config, out) = load(&args)?;
            let s = export_priors(&config, &out)?;
            for o in &s.orders {
                say(
                    args.quiet,
                    format!(
                        "order {} memory {} lags {} parameters {}",
                        o.order, o.memory, o.unique_lags, o.parameters
                    ),
                );
            }
            say(
                args.quiet,
                format!("wrote {} files to {}", s.files.len(), out.display()),
            );
            Ok(true)
        }
        Command::Verify(args) => {
            let report = run_property_suite(args.seed)?;
            for c in &report.checks {
                say(
                    args.quiet,
                    format!(
                        "{} {:<40} cases {:>3} worst {:.3e} (tol {:.0e})",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.name,
                        c.cases,
                        c.worst,
                        c.tolerance
                    ),
                );
            }
            if let Some(dir) = &args.out {
                let mut json = serde_json::to_string_pretty(&report)?;
                json.push('\n');
                gfrf::io::write_string(&dir.join("verify.json"), &json)?;
            }
            Ok(report.all_passed)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            let code = if e.is_validation() {
                2
            } else if matches!(e.root(), Error::Io(_)) {
                1
            } else {
                3
            };
            ExitCode::from(code)
        }
    }
}
