//! Zadoff-Chu preamble acquisition and Kay's single-tone frequency estimator.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::fft;
use crate::waveform::{AnalogSignal, PulseShape, PulseTrain, TimeGrid, Waveform, DEFAULT_SPAN};
use crate::{invalid, Error, Result};

pub const DEFAULT_LENGTH: usize = 256;
pub const DEFAULT_ROOT: u64 = 25;
pub const DEFAULT_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct Preamble {
    pub length: usize,
    pub root: u64,
    /// Unit-modulus chips at rate `B`.
    pub samples: Vec<Complex64>,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zadoff-Chu sequence: `exp(-j pi u n^2 / L)` for even `L`,
/// `exp(-j pi u n (n+1) / L)` for odd `L`.
pub fn make_preamble(length: usize, root: u64) -> Result<Preamble> {
    if length < 2 {
        return Err(invalid("preamble_length", "must be at least 2"));
    }
    if root == 0 || gcd(root, length as u64) != 1 {
        return Err(Error::NonCoprimeRoot { root, length });
    }
    let l = length as u128;
    let u = root as u128;
    let samples = (0..length as u128)
        .map(|n| {
            // Reduce the exponent exactly modulo 2L before converting to an angle.
            let k = if length.is_multiple_of(2) { u * n * n } else { u * n * (n + 1) } % (2 * l);
            Complex64::from_polar(1.0, -PI * k as f64 / length as f64)
        })
        .collect();
    Ok(Preamble { length, root, samples })
}

impl Preamble {
    /// Chips shaped by `w1` at rate `Q B` over `[0, L Q)`. Ideal filters are
    /// replaced by their truncated counterpart.
    pub fn replica(&self, shape: &PulseShape, q: usize, bandwidth: f64) -> Result<Vec<Complex64>> {
        let shape = if shape.is_ideal() { shape.clone().with_span(DEFAULT_SPAN) } else { shape.clone() };
        let train = PulseTrain::new(&shape, bandwidth, q, 0, self.samples.clone())?;
        let grid = TimeGrid::new(0, self.length * q, q, bandwidth)?;
        Ok(train.sample(&grid))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    /// Sample offset of the preamble start in the received buffer.
    pub start_index: usize,
    /// Hz.
    pub cfo_hat: f64,
    /// Normalized correlation at `start_index`, in `[0, 1]`.
    pub peak_metric: f64,
}

/// Normalized cross-correlation `|sum r[m+i] p*[i]| / (|p| |r[m..m+len]|)` for
/// every full-overlap lag `m`.
pub fn correlation_metric(rx: &[Complex64], replica: &[Complex64]) -> Result<Vec<f64>> {
    let (n, p) = (rx.len(), replica.len());
    if p == 0 || n < p {
        return Err(Error::TooShort { need: p.max(1), got: n });
    }
    let nfft = (n + p).next_power_of_two();
    let mut a = rx.to_vec();
    a.resize(nfft, Complex64::new(0.0, 0.0));
    let mut b = replica.to_vec();
    b.resize(nfft, Complex64::new(0.0, 0.0));
    fft::fft_in_place(&mut a);
    fft::fft_in_place(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y.conj();
    }
    fft::ifft_in_place(&mut a);
    let p_norm = replica.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in rx {
        prefix.push(prefix.last().unwrap() + v.norm_sqr());
    }
    Ok((0..=n - p)
        .map(|m| {
            let e = (prefix[m + p] - prefix[m]).max(0.0);
            let denom = p_norm * e.sqrt();
            if denom <= 1e-300 {
                0.0
            } else {
                (a[m].norm() / denom).min(1.0)
            }
        })
        .collect())
}

/// Locates the preamble by the peak of the normalized correlation.
pub fn detect_timing(rx: &AnalogSignal, replica: &[Complex64], threshold: f64) -> Result<SyncResult> {
    let metric = correlation_metric(&rx.samples, replica)?;
    let mut best = 0;
    for (m, v) in metric.iter().enumerate() {
        if *v > metric[best] {
            best = m;
        }
    }
    let peak = metric[best];
    if peak.is_nan() || peak < threshold {
        return Err(Error::NoPeak { metric: peak, threshold });
    }
    Ok(SyncResult { start_index: best, cfo_hat: 0.0, peak_metric: peak })
}

/// Kay's weighted phase-difference frequency estimate in Hz.
pub fn kay_cfo(samples: &[Complex64], sample_rate: f64) -> Result<f64> {
    let l = samples.len();
    if l < 2 {
        return Err(Error::TooShort { need: 2, got: l });
    }
    let lf = l as f64;
    let half = lf / 2.0;
    let w: Vec<f64> = (1..l)
        .map(|n| 1.5 * lf / (lf * lf - 1.0) * (1.0 - ((n as f64 - half) / half).powi(2)))
        .collect();
    let total: f64 = w.iter().sum();
    let acc: f64 = (1..l)
        .zip(&w)
        .map(|(n, wn)| wn * (samples[n] * samples[n - 1].conj()).arg())
        .sum();
    Ok(sample_rate / (2.0 * PI) * acc / total)
}

/// Chips summed per block before Kay's estimator in [`acquire`].
pub const KAY_BLOCK_CHIPS: usize = 16;

/// Timing detection followed by Kay's estimate on the de-modulated preamble.
///
/// The de-modulated samples are summed over blocks of [`KAY_BLOCK_CHIPS`]
/// chips first, which suppresses the cross terms that delayed paths leave
/// in the product with the replica.
pub fn acquire(rx: &AnalogSignal, replica: &[Complex64], threshold: f64) -> Result<SyncResult> {
    let mut sync = detect_timing(rx, replica, threshold)?;
    let z: Vec<Complex64> = replica
        .iter()
        .enumerate()
        .map(|(i, p)| rx.samples[sync.start_index + i] * p.conj())
        .collect();
    let block = (KAY_BLOCK_CHIPS * rx.grid.q).min(z.len() / 2).max(1);
    let sums: Vec<Complex64> = z.chunks_exact(block).map(|c| c.iter().sum()).collect();
    sync.cfo_hat = kay_cfo(&sums, rx.grid.rate() / block as f64)?;
    Ok(sync)
}

/// Drops samples before `start_index` and removes `cfo_hat`, with time
/// measured from the retained first sample.
pub fn correct(rx: &AnalogSignal, sync: &SyncResult) -> Result<AnalogSignal> {
    let len = rx.samples.len();
    if sync.start_index >= len {
        return Err(Error::StartOutOfRange { start: sync.start_index, len });
    }
    let rate = rx.grid.rate();
    let samples: Vec<Complex64> = rx.samples[sync.start_index..]
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if sync.cfo_hat == 0.0 {
                *v
            } else {
                v * Complex64::from_polar(1.0, -2.0 * PI * sync.cfo_hat * i as f64 / rate)
            }
        })
        .collect();
    let grid = TimeGrid { start: rx.grid.start + sync.start_index as i64, len: samples.len(), ..rx.grid };
    Ok(AnalogSignal { grid, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{add_noise, trial_rng, RngStream};
    use proptest::prelude::*;

    const B: f64 = 1.92e6;

    fn periodic_autocorr(x: &[Complex64], lag: usize) -> Complex64 {
        let n = x.len();
        (0..n).map(|i| x[(i + lag) % n] * x[i].conj()).sum()
    }

    #[test]
    fn default_preamble_properties() {
        let p = make_preamble(256, 25).unwrap();
        assert!(p.samples.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        assert!((periodic_autocorr(&p.samples, 0).norm() - 256.0).abs() < 1e-9);
        let side = (1..256).map(|m| periodic_autocorr(&p.samples, m).norm()).fold(0.0, f64::max);
        assert!(side / 256.0 <= 0.05, "{side}");
    }

    #[test]
    fn length_four_values() {
        let p = make_preamble(4, 1).unwrap();
        let want = [0.0, -PI / 4.0, -PI, -9.0 * PI / 4.0];
        for (v, ph) in p.samples.iter().zip(want) {
            assert!((v - Complex64::from_polar(1.0, ph)).norm() < 1e-12);
        }
        assert!(matches!(make_preamble(256, 16), Err(Error::NonCoprimeRoot { .. })));
    }

    #[test]
    fn cyclic_shift_moves_peak() {
        let p = make_preamble(64, 5).unwrap();
        let mut shifted = p.samples.clone();
        shifted.rotate_right(11);
        let corr: Vec<f64> = (0..64)
            .map(|m| (0..64).map(|i| shifted[(i + m) % 64] * p.samples[i].conj()).sum::<Complex64>().norm())
            .collect();
        let arg = corr.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(arg, 11);
    }

    fn embed(replica: &[Complex64], offset: usize, total: usize) -> AnalogSignal {
        let mut s = vec![Complex64::new(0.0, 0.0); total];
        s[offset..offset + replica.len()].copy_from_slice(replica);
        AnalogSignal::new(TimeGrid::new(0, total, 4, B).unwrap(), s).unwrap()
    }

    #[test]
    fn noiseless_detection_is_exact() {
        let shape = PulseShape::rrc(0.5).unwrap();
        let rep = make_preamble(256, 25).unwrap().replica(&shape, 4, B).unwrap();
        let rx = embed(&rep, 333, 3000);
        let s = detect_timing(&rx, &rep, 0.3).unwrap();
        assert_eq!(s.start_index, 333);
        assert!((s.peak_metric - 1.0).abs() < 1e-9);
    }

    #[test]
    fn silence_is_no_peak() {
        let shape = PulseShape::rrc(0.5).unwrap();
        let rep = make_preamble(64, 5).unwrap().replica(&shape, 4, B).unwrap();
        let rx = AnalogSignal::zeros(TimeGrid::new(0, 1000, 4, B).unwrap());
        assert!(matches!(detect_timing(&rx, &rep, 0.3), Err(Error::NoPeak { .. })));
        let short = AnalogSignal::zeros(TimeGrid::new(0, 10, 4, B).unwrap());
        assert!(matches!(detect_timing(&short, &rep, 0.3), Err(Error::TooShort { .. })));
    }

    #[test]
    fn kay_on_tones() {
        let rate = 4.0 * B;
        assert!(matches!(kay_cfo(&[Complex64::new(1.0, 0.0)], rate), Err(Error::TooShort { .. })));
        let dc = vec![Complex64::new(0.3, 0.4); 100];
        assert_eq!(kay_cfo(&dc, rate).unwrap(), 0.0);
        for i in -20..=20 {
            let f = i as f64 * 0.024 * rate;
            let x: Vec<Complex64> = (0..500).map(|n| Complex64::from_polar(1.0, 2.0 * PI * f * n as f64 / rate)).collect();
            let est = kay_cfo(&x, rate).unwrap();
            assert!((est - f).abs() <= 1e-6 * f.abs().max(1.0), "f={f} est={est}");
        }
    }

    #[test]
    fn kay_noisy_tone() {
        let rate = 4.0 * B;
        let f = 7.5e3;
        let mut total = 0.0;
        for trial in 0..200 {
            let mut x: Vec<Complex64> =
                (0..1024).map(|n| Complex64::from_polar(1.0, 2.0 * PI * f * n as f64 / rate)).collect();
            add_noise(&mut x, 0.01, &mut trial_rng(77, trial, RngStream::Noise));
            total += (kay_cfo(&x, rate).unwrap() - f).abs();
        }
        assert!(total / 200.0 < 0.01 * f, "{}", total / 200.0);
    }

    #[test]
    fn correct_inverts_known_impairment() {
        let rate = 4.0 * B;
        let x: Vec<Complex64> = (0..300).map(|n| Complex64::new((n as f64 * 0.1).sin(), 0.2)).collect();
        let (m, f) = (17usize, 2500.0);
        let mut r = vec![Complex64::new(0.0, 0.0); m];
        r.extend(x.iter().enumerate().map(|(n, v)| v * Complex64::from_polar(1.0, 2.0 * PI * f * n as f64 / rate)));
        let rx = AnalogSignal::new(TimeGrid::new(0, r.len(), 4, B).unwrap(), r).unwrap();
        let back = correct(&rx, &SyncResult { start_index: m, cfo_hat: f, peak_metric: 1.0 }).unwrap();
        for (a, b) in back.samples.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
        let same = correct(&rx, &SyncResult { start_index: 0, cfo_hat: 0.0, peak_metric: 1.0 }).unwrap();
        assert_eq!(same, rx);
        let half = correct(&rx, &SyncResult { start_index: m, cfo_hat: f / 2.0, peak_metric: 1.0 }).unwrap();
        let tone: Vec<Complex64> = half.samples.iter().zip(&x).map(|(a, b)| a / b).collect();
        assert!((kay_cfo(&tone, rate).unwrap() - f / 2.0).abs() < 1e-6 * f);
        assert!(correct(&rx, &SyncResult { start_index: 10_000, cfo_hat: 0.0, peak_metric: 1.0 }).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn detection_shift_equivariant(pad in 0usize..300, off in 0usize..500) {
            let shape = PulseShape::rrc(0.5).unwrap();
            let rep = make_preamble(64, 5).unwrap().replica(&shape, 4, B).unwrap();
            let a = detect_timing(&embed(&rep, off, 1200), &rep, 0.3).unwrap();
            let b = detect_timing(&embed(&rep, off + pad, 1200 + pad), &rep, 0.3).unwrap();
            prop_assert_eq!(b.start_index, a.start_index + pad);
        }
    }
}
