//! Command-line pipeline: mine scenarios from HighD-format recordings, compute
//! coverage reports and render plot-ready curve data.

pub mod commands;
pub mod config;
pub mod report;
pub mod store;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status of a command that did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or configuration (exit code 1).
    Usage(anyhow::Error),
    /// Unreadable or inconsistent data (exit code 2).
    Data(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) => e,
        }
    }
}

pub type CmdResult = Result<(), Failure>;

pub(crate) trait OrFail<T> {
    fn usage(self) -> Result<T, Failure>;
    fn data(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrFail<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Data(e.into()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "odd-coverage", version, about = "Scenario mining and coverage metrics for highway trajectory data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by the pipeline commands. Every flag overrides the
/// corresponding configuration key.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Override any key, e.g. `--set mining.approach_dv_min=2`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Recording directories, track files or glob patterns (input.paths).
    #[arg(short, long)]
    pub input: Vec<String>,
    /// Output directory (output.dir).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for one per core (run.workers).
    #[arg(short, long)]
    pub workers: Option<usize>,
    /// Enable the "no leading vehicle" catch-all (mining.catch_all).
    #[arg(long)]
    pub catch_all: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMetric {
    Tag,
    Time,
    Actor,
    ActorOverTime,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate recordings without mining.
    IngestCheck {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Mine and tag scenarios into a scenario store.
    Mine {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compute the coverage report from a scenario store.
    Coverage {
        #[command(flatten)]
        config: ConfigArgs,
        /// Scenario store directory (defaults to the output directory).
        #[arg(long)]
        store: Option<PathBuf>,
        /// Compute tag coverage from a tag-by-category count CSV instead.
        #[arg(long)]
        kappa_file: Option<PathBuf>,
    },
    /// Evaluate a single metric over a parameter grid and write `param,value`.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum)]
        metric: SweepMetric,
        /// Comma-separated grid: n for tag/time, box front length for actor metrics.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        /// Tags, tag groups or `all` (tag metric).
        #[arg(long, value_delimiter = ',')]
        tags: Vec<String>,
        /// Categories or `all` (tag metric).
        #[arg(long, value_delimiter = ',')]
        categories: Vec<String>,
        /// Box lateral half-width (actor metrics).
        #[arg(long, default_value_t = 5.0)]
        lat: f64,
        /// Extend the box behind the ego (actor metrics).
        #[arg(long)]
        include_rear: bool,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        kappa_file: Option<PathBuf>,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Render a coverage report into curve CSVs and a text summary.
    Report {
        /// Report file (defaults to report.json in the current directory).
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
        /// Output directory (defaults to the report's directory).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write synthetic HighD-format recordings with ground truth.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        /// Number of random recordings; the scripted fixture catalog when omitted.
        #[arg(long)]
        random: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Vehicles per random recording.
        #[arg(long, default_value_t = 12)]
        vehicles: usize,
        /// Seconds per random recording.
        #[arg(long, default_value_t = 20.0)]
        duration: f64,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            f.code()
        }
    }
}
