//! One end-to-end transmission: preamble and frame through the channel and
//! back to bits.

use rand::Rng;
use serde::Serialize;
use zakotfs::{
    acquire, correct, demap_symbols, dzt, estimate, estimate_noise_from_guard, frame_impulses, idzt,
    map_bits, matched_filter, mmse_equalize, sample_and_periodize, trial_rng, AnalogSignal, Complex64,
    Constellation, DDGrid, EffectiveChannelEstimate, FrameLayout, FrameParams, Impaired, ImpairmentSpec,
    MmseSolver, Multipath, PulseShape, PulseTrain, RngStream, SupportRegion, SyncResult, TimeGrid,
    TwistedConvOperator, Waveform,
};

use crate::config::{uniform_phase, CfoCorrection, ConfigError, ExperimentConfig, NoiseSource};

/// Idle chips captured before the burst and after the frame.
const LEAD_CHIPS: i64 = 64;
const TAIL_CHIPS: i64 = 64;

#[derive(Debug, thiserror::Error)]
pub enum TrialError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trial {index}: {source}")]
    Dsp { index: u64, source: zakotfs::Error },
}

/// Validated configuration with everything a trial needs precomputed.
#[derive(Debug, Clone)]
pub struct Link {
    pub cfg: ExperimentConfig,
    pub params: FrameParams,
    pub layout: FrameLayout,
    pub shape: PulseShape,
    pub constellation: Constellation,
    pub support: SupportRegion,
    pub pilot_amp: f64,
    pub impairments: ImpairmentSpec,
    preamble: Option<Vec<Complex64>>,
    replica: Option<Vec<Complex64>>,
}

impl Link {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let params = cfg.frame_params()?;
        let layout = cfg.frame_layout(&params)?;
        let shape = cfg.pulse_shape()?;
        let (preamble, replica) = if cfg.sync.enabled {
            let p = zakotfs::make_preamble(cfg.sync.preamble_length, cfg.sync.root)
                .map_err(|e| ConfigError::Invalid { field: "sync.root".into(), reason: e.to_string() })?;
            let r = p
                .replica(&shape, cfg.shape.oversampling, params.bandwidth)
                .map_err(|e| ConfigError::Invalid { field: "sync".into(), reason: e.to_string() })?;
            (Some(p.samples), Some(r))
        } else {
            (None, None)
        };
        Ok(Self {
            params,
            support: cfg.support(&layout)?,
            layout,
            shape,
            constellation: cfg.constellation()?,
            pilot_amp: cfg.pilot_amp(),
            impairments: cfg.impairments(&params)?,
            preamble,
            replica,
            cfg: cfg.clone(),
        })
    }

    pub fn oversampling(&self) -> usize {
        self.cfg.shape.oversampling
    }

    pub fn bits_per_frame(&self) -> usize {
        self.layout.bits_required(&self.constellation)
    }

    fn preamble_first(&self, frame_lo: i64) -> Option<i64> {
        let len = self.preamble.as_ref()?.len() as i64;
        Some(frame_lo - self.cfg.sync.gap as i64 - len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncReport {
    pub start_index: usize,
    pub cfo_hat_hz: f64,
    pub peak_metric: f64,
}

impl From<SyncResult> for SyncReport {
    fn from(s: SyncResult) -> Self {
        Self { start_index: s.start_index, cfo_hat_hz: s.cfo_hat, peak_metric: s.peak_metric }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub trial_index: u64,
    pub seed: u64,
    pub snr_db: f64,
    pub bit_errors: usize,
    pub bits_sent: usize,
    pub sync: Option<SyncReport>,
    pub sync_failed: bool,
    /// Per-fine-sample noise variance used for the trial.
    pub noise_var: f64,
    /// Equalized data-cell symbols in canonical order.
    #[serde(skip)]
    pub equalized: Vec<Complex64>,
    /// Non-zero in-support taps `(delay, doppler, value)`.
    #[serde(skip)]
    pub taps: Vec<(i64, i64, Complex64)>,
}

impl TrialReport {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits_sent as f64
    }
}

/// Everything produced by a trial, for inspection and dumps.
#[derive(Debug, Clone)]
pub struct TrialArtifacts {
    pub report: TrialReport,
    pub rx: AnalogSignal,
    pub estimate: Option<EffectiveChannelEstimate>,
    pub equalized: Option<DDGrid>,
}

fn dsp(index: u64) -> impl Fn(zakotfs::Error) -> TrialError {
    move |source| TrialError::Dsp { index, source }
}

/// Runs trial `trial_index` at `snr_db`; `None` disables noise.
pub fn run_trial(link: &Link, snr_db: Option<f64>, trial_index: u64) -> Result<TrialReport, TrialError> {
    run_trial_detailed(link, snr_db, trial_index).map(|a| a.report)
}

/// Transmit, channel and receiver front end of one trial.
#[derive(Debug, Clone)]
pub struct ReceivedFrame {
    pub bits: Vec<u8>,
    pub rx: AnalogSignal,
    /// Received DD grid; `None` when synchronization failed.
    pub y_dd: Option<DDGrid>,
    pub sync: Option<SyncReport>,
    pub noise_var: f64,
}

/// Runs a trial up to the received DD grid.
pub fn receive(link: &Link, snr_db: Option<f64>, trial_index: u64) -> Result<ReceivedFrame, TrialError> {
    let err = dsp(trial_index);
    let cfg = &link.cfg;
    let seed = cfg.run.seed;
    let params = &link.params;
    let q = link.oversampling();
    let qi = q as i64;
    let b = params.bandwidth;

    let nbits = link.bits_per_frame();
    let mut bit_rng = trial_rng(seed, trial_index, RngStream::Bits);
    let bits: Vec<u8> = (0..nbits).map(|_| bit_rng.random_range(0..2u8)).collect();
    let x_dd = map_bits(&bits, &link.constellation, &link.layout, link.pilot_amp).map_err(&err)?;
    let s = idzt(&x_dd);

    let (lo, amps) = frame_impulses(&s, &link.shape, params).map_err(&err)?;
    let hi = lo + amps.len() as i64;
    let pre_first = link.preamble_first(lo);
    let cap_lo = pre_first.unwrap_or(lo) - LEAD_CHIPS;
    let cap_chips = (hi + TAIL_CHIPS - cap_lo) as usize;
    let (period, cap_len) = if link.shape.is_ideal() {
        let p = cap_chips.next_power_of_two();
        (p, p * q)
    } else {
        (cap_chips.next_power_of_two(), cap_chips * q)
    };
    let capture = TimeGrid::new(cap_lo * qi, cap_len, q, b).map_err(&err)?;

    let mut ch_rng = trial_rng(seed, trial_index, RngStream::Channel);
    let phases: Vec<f64> = cfg
        .channel
        .paths
        .iter()
        .map(|_| {
            let u: f64 = ch_rng.random();
            if cfg.channel.random_phase {
                uniform_phase(u)
            } else {
                0.0
            }
        })
        .collect();
    let paths = cfg.paths(params, &phases);

    let through = |train: &PulseTrain| -> Vec<Complex64> {
        let mp = Multipath::new(train, &paths);
        Impaired::new(&mp, link.impairments).sample(&capture)
    };
    let frame = PulseTrain::with_period(&link.shape, b, q, lo, amps, period).map_err(&err)?;
    let mut rx = through(&frame);
    let frame_power = rx.iter().map(|v| v.norm_sqr()).sum::<f64>() / (q * params.mn()) as f64;
    if let (Some(chips), Some(first)) = (&link.preamble, pre_first) {
        let train = PulseTrain::with_period(&link.shape, b, q, first, chips.clone(), period).map_err(&err)?;
        for (r, p) in rx.iter_mut().zip(through(&train)) {
            *r += p;
        }
    }
    let noise_var = match snr_db {
        Some(snr) => frame_power / 10f64.powf(snr / 10.0),
        None => 0.0,
    };
    let mut noise_rng = trial_rng(seed, trial_index, RngStream::Noise);
    zakotfs::channel::add_noise(&mut rx, noise_var, &mut noise_rng);
    let rx = AnalogSignal::new(capture, rx).map_err(&err)?;

    let (aligned, sync) = match (&link.replica, pre_first) {
        (Some(replica), Some(first)) => {
            let acq = match acquire(&rx, replica, cfg.sync.threshold) {
                Ok(a) => a,
                Err(zakotfs::Error::NoPeak { .. }) => {
                    return Ok(ReceivedFrame { bits, rx, y_dd: None, sync: None, noise_var })
                }
                Err(e) => return Err(err(e)),
            };
            let applied = match cfg.sync.cfo_correction {
                CfoCorrection::TimeDomain => acq,
                CfoCorrection::ChannelFolded => SyncResult { cfo_hat: 0.0, ..acq },
            };
            let mut c = correct(&rx, &applied).map_err(&err)?;
            c.grid.start = first * qi;
            (c, Some(SyncReport::from(acq)))
        }
        _ => (rx.clone(), None),
    };

    let y = matched_filter(&aligned, &link.shape, params);
    let y_dd = match sample_and_periodize(&y, &link.shape, params) {
        Ok(v) => Some(dzt(&v)),
        Err(zakotfs::Error::CoverageInsufficient { .. }) if sync.is_some() => None,
        Err(e) => return Err(err(e)),
    };
    Ok(ReceivedFrame { bits, rx, y_dd, sync, noise_var })
}

pub fn run_trial_detailed(link: &Link, snr_db: Option<f64>, trial_index: u64) -> Result<TrialArtifacts, TrialError> {
    let err = dsp(trial_index);
    let cfg = &link.cfg;
    let ReceivedFrame { bits, rx, y_dd, sync, noise_var } = receive(link, snr_db, trial_index)?;
    let nbits = bits.len();
    let report = |bit_errors, sync_failed, equalized, taps| TrialReport {
        trial_index,
        seed: cfg.run.seed,
        snr_db: snr_db.unwrap_or(f64::INFINITY),
        bit_errors,
        bits_sent: nbits,
        sync: sync.clone(),
        sync_failed,
        noise_var,
        equalized,
        taps,
    };
    let Some(y_dd) = y_dd else {
        return Ok(TrialArtifacts { report: report(nbits / 2, true, Vec::new(), Vec::new()), rx, estimate: None, equalized: None });
    };
    let h = estimate(&y_dd, &link.layout, &link.support, link.pilot_amp).map_err(&err)?;
    let dd_noise = match cfg.estimation.noise {
        NoiseSource::Genie => noise_var / link.oversampling() as f64,
        NoiseSource::Guard => estimate_noise_from_guard(&y_dd, &link.layout, &link.support).unwrap_or(0.0),
    };
    let op = TwistedConvOperator::new(&h);
    let x_hat = mmse_equalize(&y_dd, &op, dd_noise, MmseSolver::Auto).map_err(&err)?;
    let rx_bits = demap_symbols(&x_hat, &link.layout, &link.constellation);
    let bit_errors = rx_bits.iter().zip(&bits).filter(|(a, b)| a != b).count();
    let equalized = link.layout.data_cells().iter().map(|c| x_hat[*c]).collect();
    let taps = h.support_taps().into_iter().filter(|t| t.2 != Complex64::new(0.0, 0.0)).collect();
    Ok(TrialArtifacts { report: report(bit_errors, false, equalized, taps), rx, estimate: Some(h), equalized: Some(x_hat) })
}
