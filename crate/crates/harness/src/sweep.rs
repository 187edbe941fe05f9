//! Monte-Carlo BER sweeps with ordered, worker-count-independent reduction.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use zakotfs::Complex64;

use crate::config::ExperimentConfig;
use crate::svg;
use crate::trial::{run_trial, Link, TrialError, TrialReport};

pub const CSV_HEADER: &str = "snr_db,ber,ci95,trials,errors,bits";

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ber: f64,
    /// Half-width `1.96 sqrt(p (1 - p) / bits)`.
    pub ci95: f64,
    pub trials: usize,
    pub errors: usize,
    pub bits: usize,
    pub sync_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BerCurve {
    pub label: String,
    pub points: Vec<BerPoint>,
}

impl BerCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            writeln!(out, "{},{:.6e},{:.6e},{},{},{}", p.snr_db, p.ber, p.ci95, p.trials, p.errors, p.bits).unwrap();
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

/// Aggregated reports for one SNR, sorted by trial index.
pub fn aggregate(snr_db: f64, reports: &[TrialReport]) -> BerPoint {
    let mut sorted: Vec<&TrialReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.trial_index);
    let errors: usize = sorted.iter().map(|r| r.bit_errors).sum();
    let bits: usize = sorted.iter().map(|r| r.bits_sent).sum();
    let ber = if bits == 0 { 0.0 } else { errors as f64 / bits as f64 };
    let ci95 = if bits == 0 { 0.0 } else { 1.96 * (ber * (1.0 - ber) / bits as f64).sqrt() };
    BerPoint {
        snr_db,
        ber,
        ci95,
        trials: sorted.len(),
        errors,
        bits,
        sync_failures: sorted.iter().filter(|r| r.sync_failed).count(),
    }
}

pub struct SweepResult {
    pub curve: BerCurve,
    /// Equalized data symbols of trial 0 at each SNR.
    pub constellations: Vec<(f64, Vec<Complex64>)>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, SweepError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))
}

/// Runs every trial of every SNR point; `workers = 0` uses all cores.
pub fn run_sweep(link: &Link, workers: usize) -> Result<SweepResult, SweepError> {
    let cfg = &link.cfg;
    let pool = pool(workers)?;
    let mut curve = BerCurve { label: curve_label(cfg), points: Vec::new() };
    let mut constellations = Vec::new();
    for &snr in &cfg.run.snr_db {
        let reports: Vec<TrialReport> = pool.install(|| {
            (0..cfg.run.trials as u64)
                .into_par_iter()
                .map(|i| run_trial(link, Some(snr), i))
                .collect::<Result<Vec<_>, _>>()
        })?;
        curve.points.push(aggregate(snr, &reports));
        let first = reports.into_iter().min_by_key(|r| r.trial_index).expect("trials >= 1");
        constellations.push((snr, first.equalized));
    }
    Ok(SweepResult { curve, constellations })
}

pub fn curve_label(cfg: &ExperimentConfig) -> String {
    let family = match cfg.shape.family {
        crate::config::Family::Rrc => format!("RRC beta={}", cfg.shape.beta),
        crate::config::Family::Sinc => "SINC".to_string(),
    };
    format!("{family}, {}-QAM", cfg.layout.modulation_order)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), SweepError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| SweepError::Io { path: parent.to_path_buf(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| SweepError::Io { path: path.to_path_buf(), source })
}

pub fn snr_tag(snr: f64) -> String {
    format!("{snr}").replace('-', "m").replace('.', "p")
}

/// Runs the sweep and writes the CSV, the BER chart and one constellation
/// plot per SNR under `cfg.output.dir`. Returns the written paths.
pub fn sweep_to_files(link: &Link, workers: usize) -> Result<(BerCurve, Vec<PathBuf>), SweepError> {
    let result = run_sweep(link, workers)?;
    let out = &link.cfg.output;
    let mut written = Vec::new();
    let csv = out.dir.join(&out.csv);
    write_file(&csv, &result.curve.to_csv())?;
    written.push(csv);
    let chart = out.dir.join(&out.svg);
    write_file(&chart, &svg::ber_chart(std::slice::from_ref(&result.curve)))?;
    written.push(chart);
    for (snr, symbols) in &result.constellations {
        let path = out.dir.join(format!("{}_snr{}.svg", out.constellation_prefix, snr_tag(*snr)));
        let title = format!("{} at {snr} dB", result.curve.label);
        write_file(&path, &svg::constellation(&title, symbols, link.constellation.points()))?;
        written.push(path);
    }
    Ok((result.curve, written))
}
