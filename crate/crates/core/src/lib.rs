//! Zak-OTFS transceiver DSP.
//!
//! The crate covers one delay-Doppler (DD) frame end to end:
//!
//! * [`dd_frame`]: frame geometry, pilot/guard/data bookkeeping and QAM mapping.
//! * [`zak`]: inverse and forward discrete Zak transforms between an `M x N`
//!   DD grid and a length-`MN` discrete-time sequence.
//! * [`waveform`]: pulse shaping with a separable delay filter `w1(t)` and
//!   time window `W2(t)`, matched filtering, sampling and `MN`-periodization.
//! * [`channel`]: doubly-dispersive multipath with timing offset, carrier
//!   frequency offset, constant phase and AWGN.
//! * [`sync`]: Zadoff-Chu preamble acquisition and Kay's frequency estimator.
//! * [`estimation`]: pilot-based effective channel estimation, the twisted
//!   convolution I/O relation and MMSE equalization.
//!
//! Continuous time is emulated on a grid oversampled `Q` times relative to the
//! frame bandwidth `B`. Sample index `m` on that grid is time `m / (Q B)`;
//! the frame is centred on `t = 0`.

pub mod channel;
pub mod dd_frame;
pub mod estimation;
pub mod sync;
pub mod waveform;
pub mod zak;

mod fft;

pub use num_complex::Complex64;

pub use channel::{
    apply_impairments, apply_paths, fold_impairments, trial_rng, ChannelSpec, ImpairmentSpec,
    Impaired, Multipath, PathSpec, RngStream,
};
pub use dd_frame::{
    build_layout, demap_symbols, map_bits, CellKind, Constellation, DDGrid, FrameLayout,
    FrameParams, GridRole,
};
pub use estimation::{
    build_io_matrix, estimate, estimate_noise_from_guard, mmse_equalize, predict_io,
    EffectiveChannelEstimate, IoOperator, MmseSolver, SparseIoMatrix, SupportKind, SupportRegion,
    TwistedConvOperator,
};
pub use sync::{acquire, correct, detect_timing, kay_cfo, make_preamble, Preamble, SyncResult};
pub use waveform::{
    frame_impulses, matched_filter, rrc_w1, rrc_w2, sample_and_periodize, synthesize, AnalogSignal, PulseFamily,
    PulseShape, PulseTrain, TimeGrid, Waveform,
};
pub use zak::{dzt, extend, idzt, DTSignal};

/// Errors raised by the transceiver operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("bit count mismatch: layout needs {expected} bits, got {got}")]
    BitCount { expected: usize, got: usize },
    #[error("pilot region does not fit: B(tau_max + dt) = {spread:.3} bins, limit {limit} bins")]
    PilotRegionTooLarge { spread: f64, limit: f64 },
    #[error("guard region covers the whole delay axis; no data cells remain")]
    NoDataCells,
    #[error("delay filter span too short: truncated tail energy {tail:.3e} exceeds {limit:.1e}")]
    SpanTooSmall { tail: f64, limit: f64 },
    #[error("signal covers fine samples [{have_lo}, {have_hi}) but [{need_lo}, {need_hi}) is required")]
    CoverageInsufficient { need_lo: i64, need_hi: i64, have_lo: i64, have_hi: i64 },
    #[error("path delay {delay:.3e} s exceeds the signal extent {extent:.3e} s")]
    DelayOutOfRange { delay: f64, extent: f64 },
    #[error("root {root} is not coprime to length {length}")]
    NonCoprimeRoot { root: u64, length: usize },
    #[error("no preamble detected: peak metric {metric:.3} below threshold {threshold:.3}")]
    NoPeak { metric: f64, threshold: f64 },
    #[error("input too short: need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("support delay range [{lo}, {hi}) exceeds grid of {m} delay bins")]
    SupportOutOfBounds { lo: i64, hi: i64, m: usize },
    #[error("iterative solver stopped after {iterations} iterations at relative residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("system matrix is singular")]
    Singular,
    #[error("start index {start} out of range for {len} samples")]
    StartOutOfRange { start: usize, len: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { field, reason: reason.into() }
}
