//! Front end for the bosonization toolkit: run configs, result tables and the verification runner.

pub mod commands;
pub mod config;
pub mod table;
pub mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use bosonize_core::Error;
use clap::{Args, Parser, Subcommand};

use config::{parse_k_list, parse_kf2_list, Command, FaultName, Format, RunConfig};
use verify::Status;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ADMISSIBILITY: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Inadmissible(String),
    #[error("{0}")]
    Compute(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Inadmissible(_) => EXIT_ADMISSIBILITY,
            CliError::Compute(_) | CliError::Verification(_) => EXIT_VERIFY,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Inadmissible { .. } => CliError::Inadmissible(e.to_string()),
            Error::InvalidFermiRadius(_)
            | Error::ZeroMomentum
            | Error::InvalidBeta(_)
            | Error::InvalidSystem(_)
            | Error::ScaledRegime
            | Error::NegativePotential { .. } => CliError::Config(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "bosonize", version, about = "Bosonized correlation energies of the Fermi gas on the integer lattice")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Lune sizes, λ range and slice counts per (kF², k).
    Lune(Common),
    /// Power sums Σλ^β with their scale ratios and continuum values.
    Riemann(Common),
    /// Fermi energy and the bosonic and exchange correlation terms per kF².
    Corr(Common),
    /// Plasmon energies against the continuum dispersion.
    Plasmon(Common),
    /// Run the invariant suites; exit 1 on any failure.
    Verify(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON run config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Comma-separated kF² values, e.g. "25,100,400".
    #[arg(long)]
    kf2: Option<String>,
    /// Semicolon-separated momenta, e.g. "1,0,0;2,0,0".
    #[arg(long)]
    k: Option<String>,
    /// Momentum cutoff for the correlation sums.
    #[arg(long)]
    cutoff: Option<i64>,
    /// Restrict verify to one suite.
    #[arg(long)]
    only: Option<String>,
    /// Injected construction fault for verify (flip_kernel_sign).
    #[arg(long)]
    fault: Option<String>,
}

impl Common {
    fn merge(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if self.format.is_some() {
            cfg.format = self.format;
        }
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        if let Some(s) = &self.kf2 {
            cfg.kf2 = Some(parse_kf2_list(s)?);
        }
        if let Some(s) = &self.k {
            cfg.k = Some(parse_k_list(s)?);
        }
        if self.cutoff.is_some() {
            cfg.cutoff = self.cutoff;
        }
        if self.only.is_some() {
            cfg.only = self.only.clone();
        }
        if let Some(f) = &self.fault {
            cfg.fault = Some(FaultName::parse(f)?);
        }
        Ok(cfg)
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::Compute(e.to_string()))
        }
    }
}

fn execute(cmd: Command, cfg: &RunConfig) -> Result<(), CliError> {
    cfg.resolved(cmd)?;
    let format = cfg.output_format();
    match cmd {
        Command::Verify => {
            let (table, checks) = verify::cmd_verify(cfg)?;
            emit(cfg, &table.render(format))?;
            let failed: Vec<&verify::Check> = checks.iter().filter(|c| c.status == Status::Fail).collect();
            for c in &failed {
                let show = |x: Option<f64>| x.map_or("-".to_string(), table::format_float);
                eprintln!("FAIL {}: value {}, threshold {}; {}", c.id(), show(c.value), show(c.threshold), c.detail);
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Verification(failed.iter().map(|c| c.id()).collect::<Vec<_>>().join(", ")))
            }
        }
        _ => {
            let table = match cmd {
                Command::Lune => commands::cmd_lune(cfg)?,
                Command::Riemann => commands::cmd_riemann(cfg)?,
                Command::Corr => commands::cmd_corr(cfg)?,
                _ => commands::cmd_plasmon(cfg)?,
            };
            emit(cfg, &table.render(format))
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (cmd, common) = match &cli.command {
        Sub::Lune(c) => (Command::Lune, c),
        Sub::Riemann(c) => (Command::Riemann, c),
        Sub::Corr(c) => (Command::Corr, c),
        Sub::Plasmon(c) => (Command::Plasmon, c),
        Sub::Verify(c) => (Command::Verify, c),
    };
    let result = common.merge().and_then(|cfg| {
        let jobs = cfg.jobs.unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        pool.install(|| execute(cmd, &cfg))
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
