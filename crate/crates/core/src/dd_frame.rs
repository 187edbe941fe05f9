//! Frame geometry, cell roles and QAM mapping on the delay-Doppler grid.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::{invalid, Error, Result};

/// Physical frame parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    /// Delay bins per period.
    pub m: usize,
    /// Doppler bins per period.
    pub n: usize,
    /// Doppler period in Hz.
    pub nu_p: f64,
    /// Delay period in seconds.
    pub tau_p: f64,
    /// Bandwidth `M nu_p` in Hz.
    pub bandwidth: f64,
    /// Frame duration `N tau_p` in seconds.
    pub duration: f64,
}

impl FrameParams {
    /// Crystalline frame with `tau_p = 1 / nu_p`.
    pub fn new(m: usize, n: usize, nu_p: f64) -> Result<Self> {
        if !(nu_p.is_finite() && nu_p > 0.0) {
            return Err(invalid("nu_p", "must be positive and finite"));
        }
        let tau_p = 1.0 / nu_p;
        Self::from_parts(m, n, nu_p, tau_p, m as f64 * nu_p, n as f64 * tau_p)
    }

    /// Validates an explicit parameter set.
    pub fn from_parts(
        m: usize,
        n: usize,
        nu_p: f64,
        tau_p: f64,
        bandwidth: f64,
        duration: f64,
    ) -> Result<Self> {
        if m < 2 || !m.is_multiple_of(2) {
            return Err(invalid("m", format!("must be even and at least 2, got {m}")));
        }
        if n < 2 || !n.is_multiple_of(2) {
            return Err(invalid("n", format!("must be even and at least 2, got {n}")));
        }
        for (field, v) in [
            ("nu_p", nu_p),
            ("tau_p", tau_p),
            ("bandwidth", bandwidth),
            ("duration", duration),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, "must be positive and finite"));
            }
        }
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
        if !rel(nu_p * tau_p, 1.0) {
            return Err(invalid("tau_p", format!("nu_p * tau_p = {} but must be 1", nu_p * tau_p)));
        }
        if !rel(bandwidth, m as f64 * nu_p) {
            return Err(invalid("bandwidth", "must equal m * nu_p"));
        }
        if !rel(duration, n as f64 * tau_p) {
            return Err(invalid("duration", "must equal n * tau_p"));
        }
        Ok(Self { m, n, nu_p, tau_p, bandwidth, duration })
    }

    /// 64 x 64 frame with a 30 kHz Doppler period.
    pub fn reference() -> Self {
        Self::new(64, 64, 30e3).expect("reference parameters are valid")
    }

    pub fn mn(&self) -> usize {
        self.m * self.n
    }

    /// Delay resolution `1/B` in seconds.
    pub fn delay_bin(&self) -> f64 {
        1.0 / self.bandwidth
    }

    /// Doppler resolution `1/T` in Hz.
    pub fn doppler_bin(&self) -> f64 {
        1.0 / self.duration
    }
}

/// What a grid holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridRole {
    Symbols,
    Received,
    Equalized,
    Channel,
}

/// `M x N` complex grid, row-major in delay: entry `(k, l)` lives at `k * N + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct DDGrid {
    m: usize,
    n: usize,
    role: GridRole,
    values: Vec<Complex64>,
}

impl DDGrid {
    pub fn zeros(m: usize, n: usize, role: GridRole) -> Self {
        Self { m, n, role, values: vec![Complex64::new(0.0, 0.0); m * n] }
    }

    pub fn from_values(m: usize, n: usize, role: GridRole, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != m * n {
            return Err(Error::DimensionMismatch { expected: m * n, got: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { m, n, role, values })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn role(&self) -> GridRole {
        self.role
    }

    pub fn with_role(mut self, role: GridRole) -> Self {
        self.role = role;
        self
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Entry at possibly out-of-range `(k, l)` using the quasi-periodic extension.
    pub fn extended(&self, k: i64, l: i64) -> Complex64 {
        crate::zak::extend(self, k, l)
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

impl Index<(usize, usize)> for DDGrid {
    type Output = Complex64;
    fn index(&self, (k, l): (usize, usize)) -> &Complex64 {
        assert!(k < self.m && l < self.n, "cell ({k}, {l}) outside {}x{}", self.m, self.n);
        &self.values[k * self.n + l]
    }
}

impl IndexMut<(usize, usize)> for DDGrid {
    fn index_mut(&mut self, (k, l): (usize, usize)) -> &mut Complex64 {
        assert!(k < self.m && l < self.n, "cell ({k}, {l}) outside {}x{}", self.m, self.n);
        &mut self.values[k * self.n + l]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Data,
    Pilot,
    Guard,
}

/// Partition of the grid into one pilot, guard cells and data cells.
///
/// Guard cells fill the delay rows `guard_rows` across all Doppler bins,
/// except the pilot itself. Every other cell carries data.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLayout {
    m: usize,
    n: usize,
    pilot: (usize, usize),
    guard_rows: std::ops::Range<usize>,
    kappa: Option<[usize; 4]>,
    kinds: Vec<CellKind>,
    data_cells: Vec<(usize, usize)>,
}

impl FrameLayout {
    /// General layout with a guard band of whole delay rows around the pilot.
    pub fn new(
        m: usize,
        n: usize,
        pilot: (usize, usize),
        guard_rows: std::ops::Range<usize>,
    ) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(invalid("layout", "grid must be non-empty"));
        }
        if pilot.0 >= m || pilot.1 >= n {
            return Err(invalid("pilot", format!("{pilot:?} outside {m}x{n}")));
        }
        if guard_rows.end > m || !guard_rows.contains(&pilot.0) {
            return Err(invalid(
                "guard_rows",
                format!("{guard_rows:?} must lie inside 0..{m} and contain the pilot row"),
            ));
        }
        let mut kinds = vec![CellKind::Data; m * n];
        let mut data_cells = Vec::new();
        for k in 0..m {
            for l in 0..n {
                let kind = if (k, l) == pilot {
                    CellKind::Pilot
                } else if guard_rows.contains(&k) {
                    CellKind::Guard
                } else {
                    data_cells.push((k, l));
                    CellKind::Data
                };
                kinds[k * n + l] = kind;
            }
        }
        if data_cells.is_empty() {
            return Err(Error::NoDataCells);
        }
        Ok(Self { m, n, pilot, guard_rows, kappa: None, kinds, data_cells })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pilot(&self) -> (usize, usize) {
        self.pilot
    }

    pub fn guard_rows(&self) -> std::ops::Range<usize> {
        self.guard_rows.clone()
    }

    /// Guard-band boundaries `[k1, k2, k3, k4]` when built by [`build_layout`].
    pub fn kappa(&self) -> Option<[usize; 4]> {
        self.kappa
    }

    pub fn kind(&self, k: usize, l: usize) -> CellKind {
        self.kinds[k * self.n + l]
    }

    /// Data cells in canonical order: increasing delay, then increasing Doppler.
    pub fn data_cells(&self) -> &[(usize, usize)] {
        &self.data_cells
    }

    pub fn guard_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == CellKind::Guard)
            .map(move |(i, _)| (i / n, i % n))
    }

    pub fn bits_required(&self, constellation: &Constellation) -> usize {
        self.data_cells.len() * constellation.bits_per_symbol()
    }
}

/// Builds the embedded-pilot layout for a channel with maximum delay `tau_max`
/// and timing-offset margin `dt_margin` (both seconds).
///
/// With `L = ceil(B (tau_max + dt_margin))` and the pilot at `(M/2, N/2)`:
/// `k1 = M/2 - 1 - L`, `k2 = M/2 - 1`, `k3 = M/2 + L`, `k4 = M/2 + 1 + L`, and
/// rows `[k1, k4)` are guard.
pub fn build_layout(params: &FrameParams, tau_max: f64, dt_margin: f64) -> Result<FrameLayout> {
    if !(tau_max.is_finite() && tau_max >= 0.0) {
        return Err(invalid("tau_max", "must be finite and non-negative"));
    }
    if !(dt_margin.is_finite() && dt_margin >= 0.0) {
        return Err(invalid("dt_margin", "must be finite and non-negative"));
    }
    let m = params.m;
    let spread = params.bandwidth * (tau_max + dt_margin);
    let limit = m as f64 / 2.0 - 2.0;
    if spread >= limit {
        return Err(Error::PilotRegionTooLarge { spread, limit });
    }
    // Tolerate rounding when tau_max + dt is an intended whole number of bins.
    let l = (spread - 1e-9).ceil().max(0.0) as usize;
    let kp = m / 2;
    let kappa = [kp - 1 - l, kp - 1, kp + l, kp + 1 + l];
    let mut layout = FrameLayout::new(m, params.n, (kp, params.n / 2), kappa[0]..kappa[3])?;
    layout.kappa = Some(kappa);
    Ok(layout)
}

/// Gray-labelled square QAM with unit average energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    bits: usize,
    points: Vec<Complex64>,
}

impl Constellation {
    /// `order` must be 4 or 16.
    pub fn qam(order: usize) -> Result<Self> {
        match order {
            4 => Ok(Self::qam4()),
            16 => Ok(Self::qam16()),
            _ => Err(invalid("modulation_order", format!("{order} is not 4 or 16"))),
        }
    }

    pub fn qam4() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let points = (0..4u8)
            .map(|label| {
                let b0 = (label >> 1) & 1;
                let b1 = label & 1;
                Complex64::new(1.0 - 2.0 * b0 as f64, 1.0 - 2.0 * b1 as f64) * s
            })
            .collect();
        Self { bits: 2, points }
    }

    pub fn qam16() -> Self {
        let gray = |b: u8| match b {
            0b00 => -3.0,
            0b01 => -1.0,
            0b11 => 1.0,
            _ => 3.0,
        };
        let s = 1.0 / 10f64.sqrt();
        let points = (0..16u8)
            .map(|label| Complex64::new(gray(label >> 2), gray(label & 0b11)) * s)
            .collect();
        Self { bits: 4, points }
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    /// Points indexed by label; the first bit of a symbol is the label's MSB.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn map_label(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// Nearest point; ties go to the lowest label.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn label_from_bits(&self, bits: &[u8]) -> usize {
        bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
    }

    fn push_bits(&self, label: usize, out: &mut Vec<u8>) {
        for i in (0..self.bits).rev() {
            out.push(((label >> i) & 1) as u8);
        }
    }
}

/// Places QAM symbols on data cells, the pilot at amplitude `pilot_amp` and
/// zeros on guard cells. `bits` holds one bit (0 or 1) per byte.
pub fn map_bits(
    bits: &[u8],
    constellation: &Constellation,
    layout: &FrameLayout,
    pilot_amp: f64,
) -> Result<DDGrid> {
    let expected = layout.bits_required(constellation);
    if bits.len() != expected {
        return Err(Error::BitCount { expected, got: bits.len() });
    }
    if let Some(pos) = bits.iter().position(|&b| b > 1) {
        return Err(invalid("bits", format!("entry {pos} is {} (must be 0 or 1)", bits[pos])));
    }
    if !(pilot_amp.is_finite() && pilot_amp > 0.0) {
        return Err(invalid("pilot_amp", "must be positive and finite"));
    }
    let mut grid = DDGrid::zeros(layout.m, layout.n, GridRole::Symbols);
    let bps = constellation.bits_per_symbol();
    for (cell, chunk) in layout.data_cells.iter().zip(bits.chunks_exact(bps)) {
        grid[*cell] = constellation.map_label(constellation.label_from_bits(chunk));
    }
    grid[layout.pilot] = Complex64::new(pilot_amp, 0.0);
    Ok(grid)
}

/// Hard-decision demapping of the data cells in canonical order.
pub fn demap_symbols(grid: &DDGrid, layout: &FrameLayout, constellation: &Constellation) -> Vec<u8> {
    let mut bits = Vec::with_capacity(layout.bits_required(constellation));
    for cell in &layout.data_cells {
        constellation.push_bits(constellation.nearest(grid[*cell]), &mut bits);
    }
    bits
}
