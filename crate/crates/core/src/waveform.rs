//! Pulse shaping, matched filtering and sampling on an oversampled time grid.
//!
//! The transmitted waveform is `s(t) = sqrt(T) w1(t) * [W2(t) sum_q s[q] delta(t - q/B)]`,
//! emulated at rate `Q B`. The receiver correlates with `w1`, multiplies by
//! `sqrt(T) W2(t)` and decimates by `Q`. With that receive gain a noiseless
//! loopback returns the transmitted sequence at unit gain.
//!
//! Two pulse families are provided:
//!
//! * RRC: `w1` from the closed form, truncated to `+-span/B`; `W2` a
//!   raised-cosine-tapered window with `sum_p T W2^2(t + pT) = 1`.
//! * SINC: `w1 = sinc(Bt)` and a rectangular `W2 = 1/sqrt(T)` on `[-T/2, T/2)`.
//!   Without a span the delay filter is an ideal low-pass applied in the DFT
//!   domain of a periodic buffer; with a span it is a truncated sinc.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dd_frame::FrameParams;
use crate::fft;
use crate::zak::DTSignal;
use crate::{invalid, Error, Result};

pub const DEFAULT_SPAN: usize = 16;
pub const DEFAULT_TAIL_LIMIT: f64 = 5e-6;

const SINGULAR_GUARD: f64 = 1e-8;
const KAISER_HALF: i64 = 32;
const KAISER_BETA: f64 = 10.0;
const DIRECT_CONV_MAX_TAPS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseFamily {
    Rrc,
    Sinc,
}

/// Separable delay filter `w1` and time window `W2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape {
    family: PulseFamily,
    beta: f64,
    span: Option<usize>,
    tail_limit: f64,
}

impl PulseShape {
    /// Root-raised-cosine pair with roll-off `beta` in `(0, 1]`, span 16.
    pub fn rrc(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(invalid("beta", format!("{beta} not in (0, 1]")));
        }
        Ok(Self {
            family: PulseFamily::Rrc,
            beta,
            span: Some(DEFAULT_SPAN),
            tail_limit: DEFAULT_TAIL_LIMIT,
        })
    }

    /// Ideal sinc delay filter with a rectangular window.
    pub fn sinc() -> Self {
        Self { family: PulseFamily::Sinc, beta: 0.0, span: None, tail_limit: DEFAULT_TAIL_LIMIT }
    }

    /// Sinc delay filter truncated to `+-span/B`.
    pub fn truncated_sinc(span: usize) -> Self {
        Self { span: Some(span), ..Self::sinc() }
    }

    pub fn with_span(mut self, span: usize) -> Self {
        self.span = Some(span);
        self
    }

    pub fn with_tail_limit(mut self, limit: f64) -> Self {
        self.tail_limit = limit;
        self
    }

    pub fn family(&self) -> PulseFamily {
        self.family
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Truncation half-width in units of `1/B`; `None` means an ideal filter.
    pub fn span(&self) -> Option<usize> {
        self.span
    }

    pub fn tail_limit(&self) -> f64 {
        self.tail_limit
    }

    pub fn is_ideal(&self) -> bool {
        self.span.is_none()
    }

    /// Delay filter as a function of `x = B t`.
    pub fn w1_unit(&self, x: f64) -> f64 {
        match self.family {
            PulseFamily::Rrc => rrc_unit(x, self.beta),
            PulseFamily::Sinc => sinc(x),
        }
    }

    /// Truncated delay filter: zero beyond the span.
    fn w1_truncated(&self, x: f64) -> f64 {
        match self.span {
            Some(s) if x.abs() > s as f64 => 0.0,
            _ => self.w1_unit(x),
        }
    }

    pub fn w2(&self, t: f64, duration: f64) -> f64 {
        match self.family {
            PulseFamily::Rrc => rrc_w2(t, duration, self.beta),
            PulseFamily::Sinc => rect_w2(t, duration),
        }
    }

    /// Fraction of delay-filter energy discarded by truncation.
    pub fn tail_energy(&self) -> f64 {
        let Some(span) = self.span else { return 0.0 };
        // Both families have unit energy in units of 1/B.
        let per_unit = 256;
        let n = span * per_unit;
        let h = 1.0 / per_unit as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * self.w1_unit(i as f64 * h).powi(2);
        }
        (1.0 - 2.0 * acc * h / 3.0).max(0.0)
    }

    pub fn check_tail(&self) -> Result<()> {
        let tail = self.tail_energy();
        if tail > self.tail_limit {
            return Err(Error::SpanTooSmall { tail, limit: self.tail_limit });
        }
        Ok(())
    }

    /// Delay filter sampled at `j / (Q B)` for `|j| <= span Q`.
    pub fn taps(&self, q: usize) -> Vec<f64> {
        let s = (self.span.unwrap_or(DEFAULT_SPAN) * q) as i64;
        (-s..=s).map(|j| self.w1_unit(j as f64 / q as f64)).collect()
    }

    /// Chips `[lo, hi)` at which `W2(q/B)` is non-zero.
    pub fn frame_chips(&self, params: &FrameParams) -> (i64, i64) {
        let mn = params.mn() as i64;
        match self.family {
            PulseFamily::Sinc => (-mn / 2, mn - mn / 2),
            PulseFamily::Rrc => {
                let reach = ((1.0 + self.beta) * mn as f64 / 2.0).ceil() as i64 + 1;
                let b = params.bandwidth;
                let nz = |q: i64| self.w2(q as f64 / b, params.duration) > 0.0;
                let lo = (-reach..=reach).find(|&q| nz(q)).unwrap_or(0);
                let hi = (-reach..=reach).rev().find(|&q| nz(q)).unwrap_or(-1) + 1;
                (lo, hi)
            }
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn rrc_raw(x: f64, beta: f64) -> f64 {
    let num = (PI * x * (1.0 - beta)).sin() + 4.0 * beta * x * (PI * x * (1.0 + beta)).cos();
    let den = PI * x * (1.0 - (4.0 * beta * x).powi(2));
    num / den
}

fn rrc_unit(x: f64, beta: f64) -> f64 {
    if x.abs() < SINGULAR_GUARD {
        return 1.0 + beta * (4.0 / PI - 1.0);
    }
    let x0 = 1.0 / (4.0 * beta);
    let d = x.abs() - x0;
    if d.abs() < SINGULAR_GUARD {
        let a = PI / (4.0 * beta);
        let limit =
            beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
        let h = 1e-4;
        let slope = (rrc_raw(x0 + h, beta) - rrc_raw(x0 - h, beta)) / (2.0 * h);
        return limit + slope * d;
    }
    rrc_raw(x, beta)
}

/// RRC delay filter at time `t` for bandwidth `b`.
pub fn rrc_w1(t: f64, b: f64, beta: f64) -> f64 {
    rrc_unit(b * t, beta)
}

/// RRC time window for frame duration `duration`.
pub fn rrc_w2(t: f64, duration: f64, beta: f64) -> f64 {
    let t1 = (1.0 - beta) * duration / 2.0;
    let t2 = (1.0 + beta) * duration / 2.0;
    let a = t.abs();
    if a <= t1 {
        1.0 / duration.sqrt()
    } else if a <= t2 {
        let c = (PI / (beta * duration) * (a - t1)).cos();
        ((1.0 + c) / (2.0 * duration)).max(0.0).sqrt()
    } else {
        0.0
    }
}

/// Rectangular window `1/sqrt(T)` on `[-T/2, T/2)`.
pub fn rect_w2(t: f64, duration: f64) -> f64 {
    if t >= -duration / 2.0 && t < duration / 2.0 {
        1.0 / duration.sqrt()
    } else {
        0.0
    }
}

/// Uniform grid at rate `Q B`: sample `i` sits at fine index `start + i`, time
/// `(start + i) / (Q B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub start: i64,
    pub len: usize,
    pub q: usize,
    pub bandwidth: f64,
}

impl TimeGrid {
    pub fn new(start: i64, len: usize, q: usize, bandwidth: f64) -> Result<Self> {
        if q < 2 {
            return Err(invalid("oversampling", format!("must be at least 2, got {q}")));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(invalid("bandwidth", "must be positive and finite"));
        }
        Ok(Self { start, len, q, bandwidth })
    }

    pub fn rate(&self) -> f64 {
        self.q as f64 * self.bandwidth
    }

    pub fn time(&self, i: usize) -> f64 {
        (self.start + i as i64) as f64 / self.rate()
    }

    pub fn t0(&self) -> f64 {
        self.start as f64 / self.rate()
    }

    pub fn end(&self) -> i64 {
        self.start + self.len as i64
    }

    pub fn duration(&self) -> f64 {
        self.len as f64 / self.rate()
    }

    fn same_rate(&self, other: &TimeGrid) -> bool {
        self.q == other.q && (self.bandwidth - other.bandwidth).abs() <= 1e-12 * self.bandwidth
    }
}

/// A continuous-time signal emulated on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogSignal {
    pub grid: TimeGrid,
    pub samples: Vec<Complex64>,
}

impl AnalogSignal {
    pub fn new(grid: TimeGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len {
            return Err(Error::DimensionMismatch { expected: grid.len, got: samples.len() });
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, samples: vec![Complex64::new(0.0, 0.0); grid.len] }
    }

    /// Sum of `|x|^2` over samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Sample at absolute fine index `m`, zero outside the grid.
    pub fn at(&self, m: i64) -> Complex64 {
        let i = m - self.grid.start;
        if i < 0 || i >= self.grid.len as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.samples[i as usize]
        }
    }
}

/// Anything that can be evaluated at `t - delay` on a grid.
pub trait Waveform {
    /// Values of `x(t - delay)` at every grid time `t`.
    fn sample_delayed(&self, grid: &TimeGrid, delay: f64) -> Vec<Complex64>;

    fn sample(&self, grid: &TimeGrid) -> Vec<Complex64> {
        self.sample_delayed(grid, 0.0)
    }
}

fn split_delay(fine: f64) -> (i64, f64) {
    let mut di = fine.floor();
    let mut f = fine - di;
    if f > 1.0 - 1e-12 {
        di += 1.0;
        f = 0.0;
    } else if f < 1e-12 {
        f = 0.0;
    }
    (di as i64, f)
}

fn bessel_i0(x: f64) -> f64 {
    let y = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= y / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn kaiser_sinc(u: f64) -> f64 {
    let r = u / KAISER_HALF as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    sinc(u) * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / bessel_i0(KAISER_BETA)
}

impl Waveform for AnalogSignal {
    /// Integer delays shift exactly; fractional ones use a 64-tap
    /// Kaiser-windowed sinc interpolator.
    fn sample_delayed(&self, grid: &TimeGrid, delay: f64) -> Vec<Complex64> {
        assert!(self.grid.same_rate(grid), "grids must share the sample rate");
        let (di, f) = split_delay(delay * grid.rate());
        let base = grid.start - di - self.grid.start;
        if f == 0.0 {
            return (0..grid.len)
                .map(|i| {
                    let n = base + i as i64;
                    if n < 0 || n >= self.samples.len() as i64 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        self.samples[n as usize]
                    }
                })
                .collect();
        }
        let js: Vec<i64> = (1 - KAISER_HALF..=KAISER_HALF).collect();
        let table: Vec<f64> = js.iter().map(|&j| kaiser_sinc(j as f64 - f)).collect();
        (0..grid.len)
            .map(|i| {
                let n0 = base + i as i64;
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, w) in js.iter().zip(&table) {
                    let n = n0 - j;
                    if n >= 0 && n < self.samples.len() as i64 {
                        acc += self.samples[n as usize] * w;
                    }
                }
                acc
            })
            .collect()
    }
}

/// Weighted impulses at `t = (first + i) / B` passed through `w1`.
///
/// Evaluation at arbitrary delays is analytic: truncated filters are
/// evaluated directly at the shifted instants, the ideal filter applies the
/// delay as a linear phase on a periodic buffer of `period` chips.
#[derive(Debug, Clone)]
pub struct PulseTrain {
    shape: PulseShape,
    bandwidth: f64,
    q: usize,
    first: i64,
    amps: Vec<Complex64>,
    period: usize,
    spectrum: Option<Vec<Complex64>>,
}

impl PulseTrain {
    pub fn new(
        shape: &PulseShape,
        bandwidth: f64,
        q: usize,
        first: i64,
        amps: Vec<Complex64>,
    ) -> Result<Self> {
        let len = amps.len();
        let period = (len + (len / 2).max(256)).next_power_of_two();
        Self::with_period(shape, bandwidth, q, first, amps, period)
    }

    /// Like [`PulseTrain::new`] with an explicit ideal-filter period in chips.
    pub fn with_period(
        shape: &PulseShape,
        bandwidth: f64,
        q: usize,
        first: i64,
        amps: Vec<Complex64>,
        period: usize,
    ) -> Result<Self> {
        if q < 2 {
            return Err(invalid("oversampling", format!("must be at least 2, got {q}")));
        }
        if period < amps.len() || !period.is_multiple_of(2) {
            return Err(invalid("period", format!("{period} must be even and hold {} chips", amps.len())));
        }
        let mut train = Self {
            shape: shape.clone(),
            bandwidth,
            q,
            first,
            amps,
            period,
            spectrum: None,
        };
        if shape.is_ideal() {
            let l = q * period;
            let mut buf = vec![Complex64::new(0.0, 0.0); l];
            for (i, a) in train.amps.iter().enumerate() {
                let m = ((first + i as i64) * q as i64).rem_euclid(l as i64) as usize;
                buf[m] += a;
            }
            fft::fft_in_place(&mut buf);
            let h = brick_wall(l, q);
            for (v, hk) in buf.iter_mut().zip(&h) {
                *v *= hk * q as f64;
            }
            train.spectrum = Some(buf);
        }
        Ok(train)
    }

    /// Frame impulses `sqrt(T) W2(q/B) s[q mod MN]` over the window support.
    pub fn frame(dt: &DTSignal, shape: &PulseShape, params: &FrameParams, q: usize) -> Result<Self> {
        let (first, amps) = frame_impulses(dt, shape, params)?;
        Self::new(shape, params.bandwidth, q, first, amps)
    }

    pub fn first(&self) -> i64 {
        self.first
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    /// Ideal-filter period in chips.
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn shape(&self) -> &PulseShape {
        &self.shape
    }

    pub fn oversampling(&self) -> usize {
        self.q
    }

    /// Grid covering the impulses plus filter tails (one period when ideal).
    pub fn natural_grid(&self) -> TimeGrid {
        let q = self.q as i64;
        match self.shape.span {
            None => {
                let l = self.q * self.period;
                let centre = (self.first + self.amps.len() as i64 / 2) * q;
                TimeGrid { start: centre - l as i64 / 2, len: l, q: self.q, bandwidth: self.bandwidth }
            }
            Some(s) => {
                let reach = s as i64 * q;
                let start = self.first * q - reach;
                let end = (self.first + self.amps.len() as i64 - 1) * q + reach + 1;
                TimeGrid { start, len: (end - start) as usize, q: self.q, bandwidth: self.bandwidth }
            }
        }
    }
}

/// DFT-domain ideal low-pass on `len = Q P` bins: unity below `P/2`, `1/sqrt 2`
/// on the `+-P/2` edge bins.
fn brick_wall(len: usize, q: usize) -> Vec<f64> {
    let p = len / q;
    let half = p as i64 / 2;
    (0..len)
        .map(|k| {
            let f = fft::signed_bin(k, len).abs();
            if f < half || (p % 2 == 1 && f == half) {
                1.0
            } else if f == half {
                std::f64::consts::FRAC_1_SQRT_2
            } else {
                0.0
            }
        })
        .collect()
}

impl Waveform for PulseTrain {
    fn sample_delayed(&self, grid: &TimeGrid, delay: f64) -> Vec<Complex64> {
        assert!(
            grid.q == self.q && (grid.bandwidth - self.bandwidth).abs() <= 1e-12 * self.bandwidth,
            "grid rate must match the pulse train"
        );
        let fine = delay * grid.rate();
        let q = self.q as i64;
        let zero = Complex64::new(0.0, 0.0);
        if let Some(spec) = &self.spectrum {
            let l = spec.len();
            let mut buf: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let f = fft::signed_bin(k, l) as f64;
                    v * Complex64::from_polar(1.0, -2.0 * PI * f * fine / l as f64)
                })
                .collect();
            fft::ifft_in_place(&mut buf);
            return (0..grid.len)
                .map(|i| buf[(grid.start + i as i64).rem_euclid(l as i64) as usize])
                .collect();
        }
        let span = self.shape.span.expect("truncated filter") as i64;
        let (di, f) = split_delay(fine);
        let reach = span * q + 1;
        let table: Vec<f64> = (-reach..=reach)
            .map(|j| self.shape.w1_truncated((j as f64 - f) / q as f64))
            .collect();
        let mut out = vec![zero; grid.len];
        for (i, a) in self.amps.iter().enumerate() {
            if *a == zero {
                continue;
            }
            let centre = (self.first + i as i64) * q + di - grid.start;
            let lo = (centre - reach).max(0);
            let hi = (centre + reach + 1).min(grid.len as i64);
            for m in lo..hi {
                out[m as usize] += a * table[(m - centre + reach) as usize];
            }
        }
        out
    }
}

/// Chip index of the first impulse and the weights `sqrt(T) W2(q/B) s[q mod MN]`.
pub fn frame_impulses(dt: &DTSignal, shape: &PulseShape, params: &FrameParams) -> Result<(i64, Vec<Complex64>)> {
    if dt.len() != params.mn() {
        return Err(Error::DimensionMismatch { expected: params.mn(), got: dt.len() });
    }
    let (lo, hi) = shape.frame_chips(params);
    let st = params.duration.sqrt();
    let amps = (lo..hi)
        .map(|q| dt.at(q) * (st * shape.w2(q as f64 / params.bandwidth, params.duration)))
        .collect();
    Ok((lo, amps))
}

/// Transmit waveform for one frame on its natural grid.
pub fn synthesize(dt: &DTSignal, shape: &PulseShape, q: usize, params: &FrameParams) -> Result<AnalogSignal> {
    shape.check_tail()?;
    let train = PulseTrain::frame(dt, shape, params, q)?;
    let grid = train.natural_grid();
    let samples = train.sample(&grid);
    Ok(AnalogSignal { grid, samples })
}

/// Full linear convolution `x * h`, first `out_len` outputs, by overlap-save.
fn convolve_fft(x: &[Complex64], h: &[f64], out_len: usize) -> Vec<Complex64> {
    let t = h.len();
    let nfft = (4 * t).next_power_of_two().max(256);
    let step = nfft - (t - 1);
    let mut hf: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    hf.resize(nfft, Complex64::new(0.0, 0.0));
    fft::fft_in_place(&mut hf);
    let fwd = fft::forward(nfft);
    let inv = fft::inverse(nfft);
    let mut out = Vec::with_capacity(out_len);
    let mut seg = vec![Complex64::new(0.0, 0.0); nfft];
    let mut b = 0usize;
    while out.len() < out_len {
        let off = (b * step) as i64 - (t as i64 - 1);
        for (n, v) in seg.iter_mut().enumerate() {
            let idx = off + n as i64;
            *v = if idx >= 0 && (idx as usize) < x.len() { x[idx as usize] } else { Complex64::new(0.0, 0.0) };
        }
        fwd.process(&mut seg);
        for (v, hk) in seg.iter_mut().zip(&hf) {
            *v *= hk;
        }
        inv.process(&mut seg);
        let scale = 1.0 / nfft as f64;
        for v in &seg[t - 1..] {
            if out.len() == out_len {
                break;
            }
            out.push(v * scale);
        }
        b += 1;
    }
    out
}

/// `out[i] = sum_j taps[j] x[i + j - centre]`, zero outside `x`.
pub(crate) fn correlate(x: &[Complex64], taps: &[f64], centre: usize, use_fft: bool) -> Vec<Complex64> {
    let t = taps.len();
    if !use_fft {
        return (0..x.len())
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, w) in taps.iter().enumerate() {
                    let n = i as i64 + j as i64 - centre as i64;
                    if n >= 0 && (n as usize) < x.len() {
                        acc += x[n as usize] * w;
                    }
                }
                acc
            })
            .collect()
    }
    let rev: Vec<f64> = taps.iter().rev().copied().collect();
    let shift = t - 1 - centre;
    let full = convolve_fft(x, &rev, x.len() + shift);
    full[shift..].to_vec()
}

/// Receive filter: correlate with `w1` at unit cascade gain, then weight by
/// `sqrt(T) W2(t)`.
pub fn matched_filter(r: &AnalogSignal, shape: &PulseShape, params: &FrameParams) -> AnalogSignal {
    let q = r.grid.q;
    let z: Vec<Complex64> = if shape.is_ideal() {
        let len = r.samples.len().div_ceil(q) * q;
        let mut buf = r.samples.clone();
        buf.resize(len, Complex64::new(0.0, 0.0));
        fft::fft_in_place(&mut buf);
        for (v, h) in buf.iter_mut().zip(brick_wall(len, q)) {
            *v *= h;
        }
        fft::ifft_in_place(&mut buf);
        buf.truncate(r.samples.len());
        buf
    } else {
        let taps: Vec<f64> = shape.taps(q).iter().map(|g| g / q as f64).collect();
        let centre = taps.len() / 2;
        correlate(&r.samples, &taps, centre, taps.len() > DIRECT_CONV_MAX_TAPS)
    };
    let st = params.duration.sqrt();
    let samples = z
        .into_iter()
        .enumerate()
        .map(|(i, v)| v * (st * shape.w2(r.grid.time(i), params.duration)))
        .collect();
    AnalogSignal { grid: r.grid, samples }
}

/// Decimates by `Q` at chip instants and folds onto one `MN` period.
pub fn sample_and_periodize(y: &AnalogSignal, shape: &PulseShape, params: &FrameParams) -> Result<DTSignal> {
    let q = y.grid.q as i64;
    let (lo, hi) = shape.frame_chips(params);
    let (need_lo, need_hi) = (lo * q, (hi - 1) * q + 1);
    if y.grid.start > need_lo || y.grid.end() < need_hi {
        return Err(Error::CoverageInsufficient {
            need_lo,
            need_hi,
            have_lo: y.grid.start,
            have_hi: y.grid.end(),
        });
    }
    let mn = params.mn();
    let mut out = vec![Complex64::new(0.0, 0.0); mn];
    for (i, v) in y.samples.iter().enumerate() {
        let m = y.grid.start + i as i64;
        if m.rem_euclid(q) == 0 {
            out[(m / q).rem_euclid(mn as i64) as usize] += v;
        }
    }
    DTSignal::new(params.m, params.n, out)
}
