//! Command-line front end for the perflab toolkit.
//!
//! Ten subcommands tie ingestion, fitting, model comparison, segmentation,
//! limit forecasting, atypicity scoring, density meshes and the expansion
//! simulation into batch workflows. Every command writes its results as CSV
//! into the output directory together with a JSON run manifest; rerunning a
//! command with the same inputs, flags and seed reproduces the CSVs byte for
//! byte, with timestamps confined to the manifest.
//!
//! Exit codes: 0 on success, 1 on input or configuration errors, 2 when a
//! fit fails to converge.

mod commands;
mod input;
mod manifest;

use std::path::PathBuf;
use std::process;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use perflab_core::CoreError;

use commands::Ctx;

#[derive(Parser, Debug)]
#[command(
    name = "perflab",
    version,
    about = "Bounded-progression analysis and expansion simulation"
)]
struct Cli {
    /// Seed for randomised steps. Falls back to PERFLAB_SEED, then to the
    /// command's default (42 for forecasts, the config seed for simulations).
    #[arg(long, global = true, env = "PERFLAB_SEED")]
    seed: Option<u64>,

    /// Directory the output CSVs and the manifest are written to.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads for the sweep command. Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Suppress the status line on stdout.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate an input table and write a per-series summary.
    Ingest {
        /// Record, career, person, top-list or x,y CSV.
        input: PathBuf,
    },

    /// Fit one model to a series and write parameters and residuals.
    Fit {
        /// Record CSV (time is normalised to [0, 1]), career CSV (age is
        /// used as is) or x,y CSV.
        input: PathBuf,

        /// Registered model id, e.g. exp_wr or moore.
        #[arg(long)]
        model: String,

        /// Event to fit when the input holds several.
        #[arg(long)]
        event: Option<String>,

        /// Iteration budget for the fit.
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
    },

    /// Fit several models to one series and rank them by AICc.
    Compare {
        /// Same input kinds as fit.
        input: PathBuf,

        /// Comma-separated model ids; at least two.
        #[arg(long, value_delimiter = ',', required = true)]
        models: Vec<String>,

        /// Event to fit when the input holds several.
        #[arg(long)]
        event: Option<String>,
    },

    /// Split record series into progression periods.
    Segment {
        /// Record CSV.
        input: PathBuf,

        /// Minimum marks per period.
        #[arg(long, default_value_t = 3)]
        min_marks: usize,

        /// Minimum calendar span per period, in years.
        #[arg(long, default_value_t = 6.0)]
        min_years: f64,

        /// Adjusted-R2 drop required for a split point.
        #[arg(long, default_value_t = 1e-4)]
        prominence: f64,
    },

    /// Forecast each event's asymptotic limit with credibility intervals.
    Predict {
        /// Record CSV.
        input: PathBuf,

        /// Monte Carlo draws per event.
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
    },

    /// Score yearly top-ten lists for atypicality.
    Atypicity {
        /// Top-list CSV: event_id,year,value with ten rows per year.
        input: PathBuf,
    },

    /// Build a birth/lifespan density mesh and its entropy curve.
    Density {
        /// Person CSV or x,y CSV.
        input: PathBuf,

        /// Fixed mesh spacing; omitting it scans for the entropy maximiser.
        #[arg(long)]
        resolution: Option<f64>,

        /// Also write the 3x3 neighbourhood means.
        #[arg(long)]
        smoothed: bool,

        /// Gradient window as x0,x1,y0,y1 in data coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        window: Option<Vec<f64>>,
    },

    /// Run one expansion simulation from a config file.
    Simulate {
        /// Flat key=value config file.
        #[arg(long)]
        config: PathBuf,

        /// Also write the per-turn aggregate CSV.
        #[arg(long)]
        turns: bool,
    },

    /// Sweep the (alpha3, alpha5, beta_alpha) initialization box.
    Sweep {
        /// Flat key=value config file used as the base of every run.
        #[arg(long)]
        config: PathBuf,

        /// Nodes per dimension.
        #[arg(long, default_value_t = 10)]
        m: usize,

        /// Runs per node.
        #[arg(long, default_value_t = 100)]
        n: usize,
    },

    /// Full record pipeline: segment, fit and forecast every event.
    Report {
        /// Record CSV.
        input: PathBuf,

        /// Monte Carlo draws per event.
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        process::exit(exit_code(&err));
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = Ctx {
        out: cli.out,
        seed: cli.seed,
        jobs: cli.jobs,
        quiet: cli.quiet,
    };
    std::fs::create_dir_all(&ctx.out)
        .map_err(|e| anyhow::anyhow!("creating {}: {e}", ctx.out.display()))?;
    match cli.command {
        Command::Ingest { input } => commands::ingest(&ctx, &input),
        Command::Fit {
            input,
            model,
            event,
            max_iter,
        } => commands::fit(&ctx, &input, &model, event.as_deref(), max_iter),
        Command::Compare {
            input,
            models,
            event,
        } => commands::compare(&ctx, &input, &models, event.as_deref()),
        Command::Segment {
            input,
            min_marks,
            min_years,
            prominence,
        } => commands::segment(&ctx, &input, min_marks, min_years, prominence),
        Command::Predict { input, draws } => commands::predict(&ctx, &input, draws),
        Command::Atypicity { input } => commands::atypicity(&ctx, &input),
        Command::Density {
            input,
            resolution,
            smoothed,
            window,
        } => commands::density(&ctx, &input, resolution, smoothed, window.as_deref()),
        Command::Simulate { config, turns } => commands::simulate(&ctx, &config, turns),
        Command::Sweep { config, m, n } => commands::sweep(&ctx, &config, m, n),
        Command::Report { input, draws } => commands::report(&ctx, &input, draws),
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(CoreError::NonConvergence(_)) = cause.downcast_ref::<CoreError>() {
            return 2;
        }
    }
    1
}
