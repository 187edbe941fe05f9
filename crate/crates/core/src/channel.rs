//! Doubly-dispersive multipath channel with timing offset, carrier frequency
//! offset, constant phase and additive white Gaussian noise.
//!
//! Channel stages are composable [`Waveform`]s: a [`Multipath`] over a
//! [`PulseTrain`](crate::waveform::PulseTrain) evaluates every delay
//! analytically, so impairments folded into equivalent paths reproduce the
//! impaired output to rounding error. Sampled inputs go through a
//! windowed-sinc fractional-delay interpolator instead.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::waveform::{AnalogSignal, TimeGrid, Waveform};
use crate::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub gain: Complex64,
    /// Seconds.
    pub delay: f64,
    /// Hz.
    pub doppler: f64,
}

impl PathSpec {
    pub fn new(gain: Complex64, delay: f64, doppler: f64) -> Self {
        Self { gain, delay, doppler }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImpairmentSpec {
    /// Timing offset in seconds.
    pub dt: f64,
    /// Carrier frequency offset in Hz.
    pub eps0: f64,
    /// Constant phase in radians, `[-pi, pi)`.
    pub phi: f64,
}

impl ImpairmentSpec {
    pub fn new(dt: f64, eps0: f64, phi: f64) -> Result<Self> {
        let s = Self { dt, eps0, phi };
        s.validate()?;
        Ok(s)
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dt.is_finite() {
            return Err(invalid("dt", "must be finite"));
        }
        if !self.eps0.is_finite() {
            return Err(invalid("eps0", "must be finite"));
        }
        if !(self.phi >= -PI && self.phi < PI) {
            return Err(invalid("phi", format!("{} not in [-pi, pi)", self.phi)));
        }
        Ok(())
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub paths: Vec<PathSpec>,
    pub impairments: ImpairmentSpec,
    /// Noise variance per complex sample at rate `Q B`.
    pub noise_psd: f64,
    pub tau_max: f64,
    pub nu_max: f64,
    pub seed: u64,
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(invalid("paths", "at least one path is required"));
        }
        if !(self.noise_psd.is_finite() && self.noise_psd >= 0.0) {
            return Err(invalid("noise_psd", "must be finite and non-negative"));
        }
        for p in &self.paths {
            if !(p.gain.re.is_finite() && p.gain.im.is_finite()) {
                return Err(invalid("paths", "gain must be finite"));
            }
            if !(p.delay >= 0.0 && p.delay <= self.tau_max * (1.0 + 1e-12)) {
                return Err(invalid("paths", format!("delay {} outside [0, tau_max = {}]", p.delay, self.tau_max)));
            }
            if p.doppler.is_nan() || p.doppler.abs() > self.nu_max * (1.0 + 1e-12) {
                return Err(invalid("paths", format!("|doppler| {} exceeds nu_max = {}", p.doppler, self.nu_max)));
            }
        }
        self.impairments.validate()
    }
}

/// Lazy sum of delayed, Doppler-shifted, scaled copies of `inner`.
pub struct Multipath<'a, W: Waveform + ?Sized> {
    inner: &'a W,
    paths: &'a [PathSpec],
}

impl<'a, W: Waveform + ?Sized> Multipath<'a, W> {
    pub fn new(inner: &'a W, paths: &'a [PathSpec]) -> Self {
        Self { inner, paths }
    }
}

impl<W: Waveform + ?Sized> Waveform for Multipath<'_, W> {
    fn sample_delayed(&self, grid: &TimeGrid, delay: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); grid.len];
        for p in self.paths {
            let x = self.inner.sample_delayed(grid, delay + p.delay);
            for (i, (o, v)) in out.iter_mut().zip(x).enumerate() {
                let ph = 2.0 * PI * p.doppler * (grid.time(i) - delay - p.delay);
                *o += p.gain * v * Complex64::from_polar(1.0, ph);
            }
        }
        out
    }
}

/// Lazy `r(t - dt) e^{j(2 pi eps0 t + phi)}`, noise excluded.
pub struct Impaired<'a, W: Waveform + ?Sized> {
    inner: &'a W,
    imp: ImpairmentSpec,
}

impl<'a, W: Waveform + ?Sized> Impaired<'a, W> {
    pub fn new(inner: &'a W, imp: ImpairmentSpec) -> Self {
        Self { inner, imp }
    }
}

impl<W: Waveform + ?Sized> Waveform for Impaired<'_, W> {
    fn sample_delayed(&self, grid: &TimeGrid, delay: f64) -> Vec<Complex64> {
        let x = self.inner.sample_delayed(grid, delay + self.imp.dt);
        x.into_iter()
            .enumerate()
            .map(|(i, v)| {
                let t = grid.time(i) - delay;
                v * Complex64::from_polar(1.0, 2.0 * PI * self.imp.eps0 * t + self.imp.phi)
            })
            .collect()
    }
}

/// Multipath output sampled on `grid`.
pub fn apply_paths<W: Waveform + ?Sized>(s: &W, paths: &[PathSpec], grid: &TimeGrid) -> Result<AnalogSignal> {
    let extent = grid.duration();
    if let Some(p) = paths.iter().find(|p| !p.delay.is_finite() || p.delay.abs() > extent) {
        return Err(Error::DelayOutOfRange { delay: p.delay, extent });
    }
    AnalogSignal::new(*grid, Multipath::new(s, paths).sample(grid))
}

/// Timing offset, CFO and phase applied to `r`, then AWGN of variance `noise_psd`.
pub fn apply_impairments<W: Waveform + ?Sized, R: Rng + ?Sized>(
    r: &W,
    imp: &ImpairmentSpec,
    noise_psd: f64,
    rng: &mut R,
    grid: &TimeGrid,
) -> AnalogSignal {
    let mut samples = Impaired::new(r, *imp).sample(grid);
    add_noise(&mut samples, noise_psd, rng);
    AnalogSignal { grid: *grid, samples }
}

/// Adds circularly-symmetric complex Gaussian noise of variance `var`.
pub fn add_noise<R: Rng + ?Sized>(samples: &mut [Complex64], var: f64, rng: &mut R) {
    if var <= 0.0 {
        return;
    }
    let sd = (var / 2.0).sqrt();
    for v in samples.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v += Complex64::new(re * sd, im * sd);
    }
}

/// Impairment-free path list equivalent to `spec`.
pub fn fold_impairments(spec: &ChannelSpec) -> Vec<PathSpec> {
    let ImpairmentSpec { dt, eps0, phi } = spec.impairments;
    spec.paths
        .iter()
        .map(|p| {
            let delay = p.delay + dt;
            PathSpec {
                gain: p.gain * Complex64::from_polar(1.0, 2.0 * PI * eps0 * delay + phi),
                delay,
                doppler: p.doppler + eps0,
            }
        })
        .collect()
}

/// Independent random streams within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngStream {
    Bits,
    Channel,
    Noise,
    Other(u32),
}

impl RngStream {
    fn id(self) -> u64 {
        match self {
            RngStream::Bits => 1,
            RngStream::Channel => 2,
            RngStream::Noise => 3,
            RngStream::Other(k) => 0x1_0000_0000 | k as u64,
        }
    }
}

/// Counter-based generator for `(base_seed, trial_index, stream)`.
pub fn trial_rng(base_seed: u64, trial_index: u64, stream: RngStream) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&base_seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.id().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial_index);
    rng
}
