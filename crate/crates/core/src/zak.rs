//! Discrete Zak transforms.
//!
//! `idzt` maps an `M x N` DD grid to one period of a length-`MN` sequence,
//! `s[k + nM] = (1/sqrt N) sum_l X[k, l] e^{j 2 pi n l / N}`, and `dzt` inverts it.
//! Both are unitary.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dd_frame::{DDGrid, GridRole};
use crate::fft;
use crate::{Error, Result};

/// One `MN`-period of a discrete-time sequence at rate `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DTSignal {
    pub m: usize,
    pub n: usize,
    pub samples: Vec<Complex64>,
}

impl DTSignal {
    pub fn new(m: usize, n: usize, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != m * n {
            return Err(Error::DimensionMismatch { expected: m * n, got: samples.len() });
        }
        Ok(Self { m, n, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample at any integer index of the periodic extension.
    pub fn at(&self, q: i64) -> Complex64 {
        self.samples[q.rem_euclid(self.samples.len() as i64) as usize]
    }
}

pub fn idzt(grid: &DDGrid) -> DTSignal {
    let (m, n) = (grid.m(), grid.n());
    let mut samples = vec![Complex64::new(0.0, 0.0); m * n];
    idzt_into(m, n, grid.values(), &mut samples);
    DTSignal { m, n, samples }
}

pub fn dzt(signal: &DTSignal) -> DDGrid {
    let (m, n) = (signal.m, signal.n);
    let mut values = vec![Complex64::new(0.0, 0.0); m * n];
    dzt_into(m, n, &signal.samples, &mut values);
    DDGrid::from_values(m, n, GridRole::Received, values).expect("finite transform of finite input")
}

/// `idzt` on a row-major `M x N` slice.
pub(crate) fn idzt_into(m: usize, n: usize, dd: &[Complex64], out: &mut [Complex64]) {
    let plan = fft::inverse(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..m {
        row.copy_from_slice(&dd[k * n..(k + 1) * n]);
        plan.process(&mut row);
        for (i, v) in row.iter().enumerate() {
            out[k + i * m] = v * scale;
        }
    }
}

/// `dzt` into a row-major `M x N` slice.
pub(crate) fn dzt_into(m: usize, n: usize, dt: &[Complex64], out: &mut [Complex64]) {
    let plan = fft::forward(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..m {
        for (i, v) in row.iter_mut().enumerate() {
            *v = dt[k + i * m];
        }
        plan.process(&mut row);
        for (l, v) in row.iter().enumerate() {
            out[k * n + l] = v * scale;
        }
    }
}

/// Quasi-periodic extension: `X[k + aM, l + bN] = e^{j 2 pi a l / N} X[k, l]`.
pub fn extend(grid: &DDGrid, k: i64, l: i64) -> Complex64 {
    let (m, n) = (grid.m() as i64, grid.n() as i64);
    let a = k.div_euclid(m);
    let kb = k.rem_euclid(m) as usize;
    let lb = l.rem_euclid(n);
    let base = grid[(kb, lb as usize)];
    if a == 0 {
        return base;
    }
    let phase = 2.0 * PI * ((a * lb).rem_euclid(n)) as f64 / n as f64;
    base * Complex64::from_polar(1.0, phase)
}
