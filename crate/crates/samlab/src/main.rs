use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use samlab::experiment::{commands, load_config, ExperimentConfig, RunStatus};

#[derive(Parser)]
#[command(
    name = "samlab",
    about = "Sharpness-aware minimization lab: train, sweep, and inspect loss geometry",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel work.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one training experiment and record per-step metrics.
    Train(CommonArgs),
    /// Run the config's ablation grid and summarize each cell.
    Ablate(CommonArgs),
    /// Estimate the top Hessian eigenvalues at the trained weights.
    Spectrum(CommonArgs),
    /// Slice the loss landscape around the trained weights.
    Landscape(CommonArgs),
    /// Histogram the two-step vs plain gradient difference ratios.
    Ratio(CommonArgs),
    /// Check the descent lemmas and convergence-rate bounds numerically.
    Theory(CommonArgs),
    /// Print the relative-FLOPs cost table.
    Flops {
        /// Optional directory for flops.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(args: &CommonArgs) -> samlab::Result<(ExperimentConfig, PathBuf)> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| {
            samlab::Error::Config("no output directory: pass --out or set output_dir".into())
        })?;
    Ok((config, out))
}

fn run() -> samlab::Result<i32> {
    match Cli::parse().command {
        Command::Train(args) => {
            let (config, out) = resolve(&args)?;
            let status = commands::train_command(&config, &out)?;
            match status {
                RunStatus::Completed => {
                    println!("train: completed, record in {}", out.display());
                    Ok(0)
                }
                RunStatus::NumericalFailure => {
                    eprintln!(
                        "train: numerical failure, partial record in {}",
                        out.display()
                    );
                    Ok(2)
                }
            }
        }
        Command::Ablate(args) => {
            let (config, out) = resolve(&args)?;
            let rows = commands::ablate_command(&config, &out, args.threads)?;
            println!("ablate: {} cells, summary in {}", rows.len(), out.display());
            Ok(0)
        }
        Command::Spectrum(args) => {
            let (config, out) = resolve(&args)?;
            let report = commands::spectrum_command(&config, &out)?;
            println!(
                "spectrum: top eigenvalues {:?}{}",
                report.eigenvalues,
                report
                    .ratio_1_5
                    .map(|r| format!(", lambda1/lambda5 = {r:.4}"))
                    .unwrap_or_default()
            );
            Ok(0)
        }
        Command::Landscape(args) => {
            let (config, out) = resolve(&args)?;
            commands::landscape_command(&config, &out)?;
            println!("landscape: grid in {}", out.join("landscape.csv").display());
            Ok(0)
        }
        Command::Ratio(args) => {
            let (config, out) = resolve(&args)?;
            let summary = commands::ratio_command(&config, &out)?;
            println!(
                "ratio: fraction below zero {:.4} ({} coordinates excluded)",
                summary.fraction_below_zero, summary.excluded_count
            );
            Ok(0)
        }
        Command::Theory(args) => {
            let (config, out) = resolve(&args)?;
            let reports = commands::theory_command(&config, &out)?;
            let mut failed = 0;
            for report in &reports {
                let verdict = if report.passed { "pass" } else { "FAIL" };
                println!(
                    "theory: [{verdict}] {} ({} trials, {} violations, worst margin {:.3e})",
                    report.check, report.trials, report.violations, report.worst_margin
                );
                if !report.passed {
                    failed += 1;
                }
            }
            Ok(if failed == 0 { 0 } else { 2 })
        }
        Command::Flops { out } => {
            let table = commands::flops_command(out.as_deref())?;
            print!("{table}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
