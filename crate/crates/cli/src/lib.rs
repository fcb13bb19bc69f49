//! Command-line front end: capacity sweeps, detector training, BER curves
//! and a fast self-check, all writing CSV or model files.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sefdm::error::ErrorKind;
use sefdm::SefdmError;
use thiserror::Error;

pub mod check;
pub mod commands;
pub mod config;

pub use check::{cmd_check, CheckOutcome};
pub use commands::{cmd_ber, cmd_capacity, cmd_train, TrainSummary, CAPACITY_CSV_HEADER};
pub use config::{ebn0_grid, Command, RunSpec, Settings};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] SefdmError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Process exit status: 1 failed checks, 2 bad parameters, 3 numerical
    /// failure, 4 I/O or file-format failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Parameter => 2,
                ErrorKind::Numerical => 3,
                ErrorKind::Io => 4,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectorKind {
    Hard,
    Mld,
    Cnn,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Hard => "hard",
            DetectorKind::Mld => "mld",
            DetectorKind::Cnn => "cnn",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hard" => Ok(DetectorKind::Hard),
            "mld" => Ok(DetectorKind::Mld),
            "cnn" => Ok(DetectorKind::Cnn),
            other => Err(format!("unknown detector {other:?} (expected hard, mld or cnn)")),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sefdm", version, about = "SEFDM capacity, detector training and BER simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Capacity and equal-power rate sweep over (alpha, N, Eb/N0).
    Capacity(Flags),
    /// Train the residual CNN detector.
    Train(Flags),
    /// Monte Carlo bit error rate of a detector.
    Ber(Flags),
    /// Fast invariant suite.
    Check {
        #[command(flatten)]
        flags: Flags,
        /// Perturb one analytic gradient entry (negative control).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Detector for `ber`.
    #[arg(long, value_enum)]
    pub detector: Option<DetectorKind>,
    /// Subcarrier counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Compression factors, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub ebn0_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub ebn0_max: Option<f64>,
    #[arg(long)]
    pub ebn0_step: Option<f64>,
    /// Training steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Training batch size in frames.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Eb/N0 of the training data in dB.
    #[arg(long, allow_negative_numbers = true)]
    pub train_ebn0: Option<f64>,
    /// Master seed; falls back to the config file, then SEFDM_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Minimum simulated bits per Eb/N0 point.
    #[arg(long)]
    pub min_bits: Option<u64>,
    /// Minimum bit errors per Eb/N0 point.
    #[arg(long)]
    pub min_errors: Option<u64>,
    /// Model file: written by `train`, read by `ber --detector cnn`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output CSV (stdout when omitted; for `train`, the loss trace).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 1 is the reference mode.
    #[arg(long)]
    pub threads: Option<usize>,
    /// key=value config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Flags {
    fn settings(&self) -> Settings {
        Settings {
            detector: self.detector,
            n: self.n.clone(),
            alpha: self.alpha.clone(),
            ebn0_min: self.ebn0_min,
            ebn0_max: self.ebn0_max,
            ebn0_step: self.ebn0_step,
            steps: self.steps,
            batch: self.batch,
            lr: self.lr,
            train_ebn0: self.train_ebn0,
            seed: self.seed,
            min_bits: self.min_bits,
            min_errors: self.min_errors,
            model: self.model.clone(),
            out: self.out.clone(),
            threads: self.threads,
        }
    }
}

/// Merges flags, config file and environment into a [`RunSpec`].
pub fn resolve(command: Command, flags: &Flags, env_seed: Option<&str>) -> Result<RunSpec, CliError> {
    let file = match &flags.config {
        Some(path) => Settings::parse(&std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?)?,
        None => Settings::default(),
    };
    RunSpec::resolve(command, flags.settings().or(file), env_seed)
}

/// Runs a parsed command line. The resolved spec is logged to `log`.
pub fn run(cli: &Cli, env_seed: Option<&str>, log: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let (command, flags, inject_fault) = match &cli.command {
        CliCommand::Capacity(f) => (Command::Capacity, f, false),
        CliCommand::Train(f) => (Command::Train, f, false),
        CliCommand::Ber(f) => (Command::Ber, f, false),
        CliCommand::Check { flags, inject_fault } => (Command::Check, flags, *inject_fault),
    };
    let spec = resolve(command, flags, env_seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    pool.install(|| dispatch(spec, inject_fault, log))
}

fn dispatch(mut spec: RunSpec, inject_fault: bool, log: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let stderr = |e| CliError::io("<log>", e);
    match spec.command {
        Command::Capacity => {
            log.write_all(spec.to_config().as_bytes()).map_err(stderr)?;
            let mut out = open_output(spec.out.as_deref())?;
            cmd_capacity(&spec, &mut out)?;
            finish(out, spec.out.as_deref())
        }
        Command::Train => {
            log.write_all(spec.to_config().as_bytes()).map_err(stderr)?;
            let summary = cmd_train(&spec, log)?;
            match summary.final_loss {
                Some(loss) => writeln!(io::stdout(), "final train loss {loss:.6}"),
                None => writeln!(io::stdout(), "no training steps; wrote the initialized model"),
            }
            .map_err(|e| CliError::io("<stdout>", e))
        }
        Command::Ber => {
            let model = commands::prepare_ber(&mut spec)?;
            log.write_all(spec.to_config().as_bytes()).map_err(stderr)?;
            let mut out = open_output(spec.out.as_deref())?;
            cmd_ber(&spec, model.as_ref(), &mut out)?;
            finish(out, spec.out.as_deref())
        }
        Command::Check => {
            log.write_all(spec.to_config().as_bytes()).map_err(stderr)?;
            let mut stdout = io::stdout();
            let outcomes = cmd_check(inject_fault, &mut stdout)?;
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            if failed > 0 {
                Err(CliError::ChecksFailed(failed))
            } else {
                Ok(())
            }
        }
    }
}

type Output = BufWriter<Box<dyn Write>>;

fn open_output(path: Option<&Path>) -> Result<Output, CliError> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(File::create(p).map_err(|e| CliError::io(p, e))?),
        None => Box::new(io::stdout()),
    };
    Ok(BufWriter::new(sink))
}

fn finish(mut out: Output, path: Option<&Path>) -> Result<(), CliError> {
    out.flush()
        .map_err(|e| CliError::io(path.unwrap_or(Path::new("<stdout>")), e))
}
