mod commands;
mod config;
mod manifest;

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use semtrails::ingest::{Delimiter, IngestError};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::ConfigArgs;

#[derive(Debug, Parser)]
#[command(name = "semtrails", version, about = "Build, describe and check semantic trail datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn a check-in log into a semantic trail dataset
    Build(BuildArgs),
    /// Write descriptive statistics of a dataset as CSV reports
    Stats(StatsArgs),
    /// Generate a synthetic corpus with ground truth
    Gen(GenArgs),
    /// Check every trail invariant of a dataset
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DelimiterArg {
    Tab,
    Comma,
}

impl From<DelimiterArg> for Delimiter {
    fn from(d: DelimiterArg) -> Self {
        match d {
            DelimiterArg::Tab => Delimiter::Tab,
            DelimiterArg::Comma => Delimiter::Comma,
        }
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Check-in log: user, venue, ISO-8601 timestamp with offset
    #[arg(long)]
    pub checkins: PathBuf,
    /// Venue table: id, latitude, longitude, category id
    #[arg(long)]
    pub venues: PathBuf,
    /// GeoNames cities dump
    #[arg(long)]
    pub cities: PathBuf,
    /// Category id to Schema.org term
    #[arg(long)]
    pub mapping: PathBuf,
    /// Category tree: category id, name, parent id
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Wikidata cities: name, latitude, longitude, Q-id
    #[arg(long)]
    pub wikidata: Option<PathBuf>,
    /// CSV dataset to write
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    /// Turtle dataset to write
    #[arg(long)]
    pub out_ttl: Option<PathBuf>,
    /// Run manifest path [default: first output + .manifest.json]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tab")]
    pub checkins_delimiter: DelimiterArg,
    /// The check-in log starts with a header row
    #[arg(long)]
    pub checkins_header: bool,
    #[arg(long, value_enum, default_value = "comma")]
    pub venues_delimiter: DelimiterArg,
    /// Worker threads [default: available cores]
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset in the CSV layout written by `build`
    #[arg(long)]
    pub input: PathBuf,
    /// GeoNames cities dump for population lookups
    #[arg(long)]
    pub gazetteer: PathBuf,
    /// Directory receiving one stats_*.csv per report
    #[arg(long)]
    pub report_dir: PathBuf,
    /// Entries in each ranking
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Directory receiving the corpus files
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub users: usize,
    #[arg(long, default_value_t = 200)]
    pub venues: usize,
    #[arg(long, default_value_t = 20)]
    pub cities: usize,
    #[arg(long, default_value_t = 100)]
    pub checkins: usize,
    #[arg(long, default_value_t = 600)]
    pub min_gap_secs: i64,
    #[arg(long, default_value_t = 14_400)]
    pub max_gap_secs: i64,
    /// Probability of a break of eight hours or more
    #[arg(long, default_value_t = 0.1)]
    pub split_rate: f64,
    /// Probability of checking in at the same venue again
    #[arg(long, default_value_t = 0.05)]
    pub repeat_rate: f64,
    /// Probability of a check-in under a minute after the previous one
    #[arg(long, default_value_t = 0.05)]
    pub dwell_rate: f64,
    /// Probability of a jump to a far city within minutes
    #[arg(long, default_value_t = 0.02)]
    pub speed_rate: f64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Dataset in the CSV layout written by `build`
    #[arg(long)]
    pub input: PathBuf,
    /// Venue table; enables the speed check
    #[arg(long)]
    pub venues: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "comma")]
    pub venues_delimiter: DelimiterArg,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Failed(_) => 1,
            Self::Usage(_) => 2,
            Self::Parse(_) => 3,
            Self::Io(_) => 4,
        }
    }

    pub fn io(context: impl std::fmt::Display, e: io::Error) -> Self {
        Self::Io(format!("{context}: {e}"))
    }

    pub fn ingest(stage: &str, e: IngestError) -> Self {
        match e {
            IngestError::Io(e) => Self::io(stage, e),
            IngestError::Csv(e) if e.is_io_error() => Self::Io(format!("{stage}: {e}")),
            other => Self::Parse(format!("{stage}: {other}")),
        }
    }
}

/// Reader that hashes everything passing through it.
pub struct Hashing<R> {
    inner: R,
    hasher: Sha256,
    bytes: u64,
}

impl<R> Hashing<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            hasher: Sha256::new(),
            bytes: 0,
        }
    }

    pub fn finish(self) -> (String, u64) {
        (format!("{:x}", self.hasher.finalize()), self.bytes)
    }
}

impl<R: Read> Read for Hashing<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }
}

impl<W: Write> Write for Hashing<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Opens an input named by `flag`; a missing file is a usage error.
pub fn open_input(path: &Path, flag: &str) -> Result<Hashing<BufReader<File>>, CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "{flag}: no such file `{}`",
            path.display()
        )));
    }
    let file = File::open(path).map_err(|e| CliError::io(format!("{flag} `{}`", path.display()), e))?;
    Ok(Hashing::new(BufReader::with_capacity(1 << 20, file)))
}

pub fn read_to_string(path: &Path, flag: &str) -> Result<String, CliError> {
    let mut text = String::new();
    open_input(path, flag)?
        .read_to_string(&mut text)
        .map_err(|e| CliError::io(format!("{flag} `{}`", path.display()), e))?;
    Ok(text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(io::stderr)
        .init();

    let result = match cli.command {
        Command::Build(args) => commands::build(&args),
        Command::Stats(args) => commands::stats(&args),
        Command::Gen(args) => commands::gen(&args),
        Command::Validate(args) => commands::validate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("semtrails: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
