//! Command-line front end: run plans, aggregate records, emit plot data and
//! calibrate DP-SGD noise.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use dpbench::data::{load_csv, synth_mixed, Metadata};
use dpbench::dpml::{calibrate_sigma, default_orders};
use dpbench::harness::{execute_plan, load_records, persist_records, ExperimentPlan, RunStatus};
use dpbench::mechanisms::PrivacyParams;
use dpbench::report::{aggregate, emit_plot_data, load_summaries, persist_summaries, Metric, PlotShape};

#[derive(Parser)]
#[command(name = "dpbench", version, about = "Differential-privacy utility and overhead benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment plan and write run records (JSON Lines).
    Run {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the plan's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize run records per (task, ε, size) cell.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Repetitions dropped from each tail.
        #[arg(long, default_value_t = 1)]
        trim: usize,
    },
    /// Write plot-ready CSV from summaries.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// utility, runtime, runtime-delta or memory.
        #[arg(long)]
        metric: Metric,
        /// grid or lines.
        #[arg(long)]
        shape: PlotShape,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the smallest noise multiplier meeting (ε, δ) for DP-SGD.
    Calibrate {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        /// Sampling rate.
        #[arg(long)]
        q: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Write a synthetic mixed-type regression dataset and its metadata.
    Synth {
        #[arg(long)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated regression weights.
        #[arg(long, value_delimiter = ',', default_value = "1.0,-0.5")]
        weights: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        meta: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            plan,
            data,
            meta,
            out,
            seed,
        } => {
            let meta = Metadata::load(&meta)?;
            let dataset = load_csv(&data, &meta.columns, meta.target.as_deref())?;
            let mut plan = ExperimentPlan::load(&plan)?;
            if let Some(seed) = seed {
                plan.master_seed = seed;
            }
            let records = execute_plan(&plan, &dataset)?;
            persist_records(&records, &out)?;
            let failed = records.iter().filter(|r| r.status == RunStatus::Failed).count();
            let skipped = records.iter().filter(|r| r.status == RunStatus::Skipped).count();
            println!(
                "{} records ({failed} failed, {skipped} skipped) -> {}",
                records.len(),
                out.display()
            );
        }
        Command::Aggregate { input, out, trim } => {
            let records = load_records(&input)?;
            let summaries = aggregate(&records, trim)?;
            persist_summaries(&summaries, &out)?;
            let unusable = summaries.iter().filter(|s| !s.usable).count();
            println!("{} cells ({unusable} unusable) -> {}", summaries.len(), out.display());
        }
        Command::Report {
            input,
            metric,
            shape,
            out,
        } => {
            let summaries = load_summaries(&input)?;
            emit_plot_data(&summaries, metric, shape, &out)?;
            println!("{metric} data -> {}", out.display());
        }
        Command::Calibrate {
            epsilon,
            delta,
            q,
            steps,
        } => {
            let target = PrivacyParams::new(epsilon, delta)?;
            let sigma = calibrate_sigma(target, q, steps, &default_orders())?;
            println!("{sigma}");
        }
        Command::Synth {
            rows,
            seed,
            weights,
            noise,
            data,
            meta,
        } => {
            let d = synth_mixed(rows, &weights, noise, seed)?;
            d.write_csv(&data)?;
            d.metadata()
                .save(&meta)
                .with_context(|| format!("writing {}", meta.display()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            eprintln!("dpbench: {}", text.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1).map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg = format!("{msg}: {cause}");
                }
            }
            eprintln!("dpbench: {}", msg.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
