//! Batch command surface for the tapping-severity pipeline.
//!
//! Every command reads and writes files; results go to the output paths
//! (plus a short summary on standard output where it helps), diagnostics
//! go to the error stream. Exit codes: 0 success, 1 usage or
//! configuration error, 2 input data rejected, 3 internal invariant
//! violation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "tapkit",
    version,
    about = "Finger-tapping severity assessment from hand-landmark recordings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the feature table from a directory of landmark recordings.
    Extract {
        /// Directory of .jsonl landmark files.
        #[arg(long)]
        landmarks: PathBuf,
        /// Feature table CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Also write per-recording signal traces (frame, angle,
        /// is_interpolated, is_peak) into this directory.
        #[arg(long)]
        debug_signals: Option<PathBuf>,
        /// key=value configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads for per-recording extraction.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Derive consensus severity labels from an expert ratings sheet.
    GroundTruth {
        /// Ratings CSV (video_id,participant_id,hand,rater_id,rater_role,rating,difficult).
        #[arg(long)]
        ratings: PathBuf,
        /// Labels CSV to write (video_id,truth).
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank features by correlation with the severity labels.
    Correlate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Correlation report CSV to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Leave-one-participant-out cross-validation.
    Cv {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for cv_report.json and predictions.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on the full table and save it.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model JSON to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a feature table with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Predictions CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-prediction Shapley attributions and a global importance table.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Attribution matrix CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Ranked importance table; defaults to importance.txt next to --out.
        #[arg(long)]
        importance: Option<PathBuf>,
    },
    /// Inter-rater agreement statistics from a ratings sheet.
    Agreement {
        #[arg(long)]
        ratings: PathBuf,
        /// Agreement report JSON to write.
        #[arg(long)]
        out: PathBuf,
        /// Optional rater-vs-rater scatter CSV.
        #[arg(long)]
        scatter: Option<PathBuf>,
    },
    /// Subgroup error analysis of a cross-validation report.
    Bias {
        /// cv_report.json produced by the cv command.
        #[arg(long)]
        cv_report: PathBuf,
        /// Demographics CSV (participant_id,age,sex,race,pd_status,environment).
        #[arg(long)]
        demographics: PathBuf,
        /// Optional ratings sheet supplying the difficult-video flags for
        /// the quality grouping.
        #[arg(long)]
        ratings: Option<PathBuf>,
        /// Bias report JSON to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a severity-graded synthetic dataset.
    Synth {
        /// Produce the graded dataset (grades 0-4 rotating over participants).
        #[arg(long, required = true)]
        grades: bool,
        #[arg(long)]
        participants: usize,
        #[arg(long)]
        seed: u64,
        /// Directory for landmark files, oracle sidecars, and labels.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Add Gaussian keypoint noise to landmark recordings.
    Noise {
        #[arg(long)]
        landmarks: PathBuf,
        /// Noise standard deviation in normalized image units.
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        seed: u64,
        /// Directory for the noisy copies.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 1 for configuration mistakes, 2 for rejected input data, 3 for bugs.
fn exit_code(err: &tapkit::Error) -> u8 {
    match err {
        tapkit::Error::Config(_) => 1,
        tapkit::Error::Io { .. } | tapkit::Error::Malformed { .. } | tapkit::Error::Invalid(_) => 2,
        tapkit::Error::Internal(_) => 3,
    }
}
