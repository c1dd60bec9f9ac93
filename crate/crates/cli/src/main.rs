//! Command-line frontend for the linkstream toolkit.
//!
//! Exit codes: 0 success, 2 usage or configuration errors, 3 input parse
//! errors, 4 pipeline errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use linkstream::config::load_config;
use linkstream::metrics::MetricId;
use linkstream::pipeline;
use linkstream::Error;

#[derive(Parser)]
#[command(
    name = "linkstream",
    version,
    about = "Predict per-pair interaction counts in link streams and evaluate them \
             with a fractional confusion protocol"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment: train weights, predict, evaluate, write artifacts.
    Run {
        /// Experiment configuration (TOML).
        config: PathBuf,
        /// Skip evaluation (no ground truth needed in the prediction window).
        #[arg(long)]
        predict_only: bool,
    },
    /// Write raw and normalized metric score tables for the observation stream.
    Score { config: PathBuf },
    /// F-score of a two-metric mix as a function of the mixing parameter.
    Sweep {
        config: PathBuf,
        /// Reference metric (weight alpha).
        #[arg(long)]
        metric_a: String,
        /// Second metric (weight 1 - alpha).
        #[arg(long)]
        metric_b: String,
        /// Number of evenly spaced mixing values in [0, 1].
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Metric correlation matrix over the training stream.
    Correlate { config: PathBuf },
    /// Link counts per time bin over the whole input stream.
    Histogram {
        config: PathBuf,
        /// Bin width in seconds.
        #[arg(long)]
        granularity: f64,
    },
    /// Score an externally produced predictions file against the config's
    /// prediction window. Prints the report as JSON on stdout.
    Evaluate {
        /// Predictions file (`u,v,predicted_count` rows).
        predictions: PathBuf,
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidInterval { .. } => 2,
        Error::Parse { .. } | Error::SelfLoop { .. } | Error::EmptyStream => 3,
        _ => 4,
    }
}

fn real_main() -> Result<(), Error> {
    match Cli::parse().command {
        Command::Run { config, predict_only } => {
            let cfg = load_config(&config)?;
            let out = pipeline::run_experiment(&cfg, predict_only)?;
            match &out.report.evaluation {
                Some(eval) => println!(
                    "F={:.4} precision={:.4} recall={:.4} predicted={:.1} appeared={}",
                    eval.f_score,
                    eval.precision,
                    eval.recall,
                    eval.predicted_total,
                    eval.actual_total
                ),
                None => println!(
                    "predicted total {:.1} links over the prediction window (no evaluation)",
                    out.prediction.count_sum()
                ),
            }
            for file in &out.files {
                println!("wrote {}", file.display());
            }
            Ok(())
        }
        Command::Score { config } => {
            let cfg = load_config(&config)?;
            let path = pipeline::score_command(&cfg)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Sweep {
            config,
            metric_a,
            metric_b,
            points,
        } => {
            let cfg = load_config(&config)?;
            let a: MetricId = metric_a.parse()?;
            let b: MetricId = metric_b.parse()?;
            if points < 1 {
                return Err(Error::Config("sweep needs at least one point".into()));
            }
            let alphas = if points == 1 {
                vec![0.0]
            } else {
                (0..points)
                    .map(|i| i as f64 / (points - 1) as f64)
                    .collect()
            };
            let (path, rows) = pipeline::sweep_command(&cfg, a, b, alphas)?;
            let best = rows
                .iter()
                .max_by(|x, y| x.f_all.total_cmp(&y.f_all))
                .expect("at least one sweep row");
            println!("best F={:.4} at alpha={}", best.f_all, best.alpha);
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Correlate { config } => {
            let cfg = load_config(&config)?;
            let path = pipeline::correlate_command(&cfg)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Histogram { config, granularity } => {
            let cfg = load_config(&config)?;
            let path = pipeline::histogram_command(&cfg, granularity)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Evaluate { predictions, config } => {
            let cfg = load_config(&config)?;
            let doc = pipeline::evaluate_command(&cfg, &predictions)?;
            let body = serde_json::to_string_pretty(&doc)
                .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
            println!("{body}");
            Ok(())
        }
    }
}
