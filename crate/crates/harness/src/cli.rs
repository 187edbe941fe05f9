//! `zakotfs` command-line entry point.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{ConfigError, ExperimentConfig};
use crate::sweep::{snr_tag, sweep_to_files, write_file, SweepError};
use crate::trial::{run_trial_detailed, Link, TrialError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "zakotfs", version, about = "Zak-OTFS link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo BER sweep; writes CSV and SVG files.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (overrides run.workers; 0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Runs one trial and dumps its artifacts.
    Trial {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        index: u64,
        #[arg(long)]
        dump_dir: PathBuf,
        /// SNR in dB (defaults to the first configured point).
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
    },
    /// Prints the header and statistics of an IQ file.
    IqInfo { file: PathBuf },
    /// Runs the built-in oracle checks.
    Selftest,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Iq(#[from] crate::iq::IqError),
    #[error("{0}")]
    Runtime(String),
}

impl From<TrialError> for CliError {
    fn from(e: TrialError) -> Self {
        match e {
            TrialError::Config(c) => CliError::Config(c),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Sweep(SweepError::Trial(TrialError::Config(_))) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Sweep { config, workers } => sweep(&config, workers),
        Command::Trial { config, index, dump_dir, snr } => trial(&config, index, &dump_dir, snr),
        Command::IqInfo { file } => iq_info(&file),
        Command::Selftest => return selftest(),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn sweep(config: &Path, workers: Option<usize>) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config)?;
    let link = Link::new(&cfg)?;
    let start = std::time::Instant::now();
    let (curve, files) = sweep_to_files(&link, workers.unwrap_or(cfg.run.workers))?;
    println!("{}", curve.label);
    print!("{}", curve.to_csv());
    for p in curve.points.iter().filter(|p| p.sync_failures > 0) {
        println!("{} dB: {} sync failures", p.snr_db, p.sync_failures);
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn trial(config: &Path, index: u64, dir: &Path, snr: Option<f64>) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config)?;
    let link = Link::new(&cfg)?;
    let snr = snr.unwrap_or(cfg.run.snr_db[0]);
    let art = run_trial_detailed(&link, Some(snr), index)?;
    let r = &art.report;
    std::fs::create_dir_all(dir).map_err(|source| SweepError::Io { path: dir.to_path_buf(), source })?;

    let json = serde_json::to_string_pretty(r).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&dir.join("report.json"), &(json + "\n"))?;
    let mut taps = String::from("delay,doppler,re,im,abs\n");
    for (dk, dl, v) in &r.taps {
        writeln!(taps, "{dk},{dl},{:.9e},{:.9e},{:.9e}", v.re, v.im, v.norm()).unwrap();
    }
    write_file(&dir.join("taps.csv"), &taps)?;
    let title = format!("trial {index} at {snr} dB");
    write_file(
        &dir.join(format!("constellation_snr{}.svg", snr_tag(snr))),
        &crate::svg::constellation(&title, &r.equalized, link.constellation.points()),
    )?;
    crate::iq::write_iq(&dir.join("rx.iq"), art.rx.grid.rate(), &art.rx.samples)?;

    println!(
        "trial {index} at {snr} dB: {} / {} bit errors (BER {:.3e}){}",
        r.bit_errors,
        r.bits_sent,
        r.ber(),
        if r.sync_failed { ", sync failed" } else { "" }
    );
    if let Some(s) = &r.sync {
        println!("sync: start {} cfo {:.1} Hz metric {:.3}", s.start_index, s.cfo_hat_hz, s.peak_metric);
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn iq_info(file: &Path) -> Result<(), CliError> {
    let f = crate::iq::read_iq(file)?;
    let n = f.samples.len();
    let power = if n == 0 { 0.0 } else { f.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64 };
    let peak = f.samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    println!("file: {}", file.display());
    println!("version: {}", crate::iq::VERSION);
    println!("sample rate: {} Hz", f.sample_rate);
    println!("samples: {n}");
    println!("duration: {:.6e} s", n as f64 / f.sample_rate);
    println!("mean power: {power:.6e}");
    println!("peak magnitude: {peak:.6e}");
    Ok(())
}

fn selftest() -> i32 {
    let checks = crate::selftest::run();
    let mut failed = 0;
    for c in &checks {
        match &c.outcome {
            Ok(msg) => println!("PASS  {}: {msg}", c.name),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {}: {msg}", c.name);
            }
        }
    }
    println!("{} / {} checks passed", checks.len() - failed, checks.len());
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_RUNTIME
    }
}
