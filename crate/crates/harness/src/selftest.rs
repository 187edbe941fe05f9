//! Fast oracle checks run by `zakotfs selftest`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zakotfs::{
    build_io_matrix, dzt, idzt, kay_cfo, make_preamble, predict_io, Complex64, DDGrid,
    EffectiveChannelEstimate, GridRole, Impaired, ImpairmentSpec, IoOperator, Multipath, PathSpec,
    PulseShape, PulseTrain, SupportKind, SupportRegion, TimeGrid, TwistedConvOperator, Waveform,
};

use crate::config::ExperimentConfig;
use crate::trial::{run_trial, Link};

pub struct Check {
    pub name: &'static str,
    pub outcome: Result<String, String>,
}

fn random_grid(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DDGrid {
    let v = (0..m * n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    DDGrid::from_values(m, n, GridRole::Symbols, v).unwrap()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn within(err: f64, tol: f64) -> Result<String, String> {
    if err <= tol {
        Ok(format!("max error {err:.2e} <= {tol:.0e}"))
    } else {
        Err(format!("max error {err:.2e} > {tol:.0e}"))
    }
}

fn zak_roundtrip() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for (m, n) in [(2, 2), (4, 8), (8, 4), (64, 64)] {
        let x = random_grid(&mut rng, m, n);
        let s = idzt(&x);
        let back = dzt(&s);
        worst = worst.max(max_diff(x.values(), back.values()));
        let e_t: f64 = s.samples.iter().map(|v| v.norm_sqr()).sum();
        worst = worst.max((e_t - x.energy()).abs() / x.energy());
    }
    within(worst, 1e-10)
}

fn io_operator() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (m, n) = (8, 8);
    let support = SupportRegion::new(SupportKind::C1, 3, 6, (4, 4), m, n).map_err(|e| e.to_string())?;
    let taps: Vec<_> = (0..6)
        .map(|_| {
            let dk = rng.random_range(-1..2i64);
            let dl = rng.random_range(-4..4i64);
            (dk, dl, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        })
        .collect();
    let h = EffectiveChannelEstimate::from_taps(support, &taps).map_err(|e| e.to_string())?;
    let s = random_grid(&mut rng, m, n);
    let direct = predict_io(&s, &h);
    let mut out = vec![Complex64::new(0.0, 0.0); m * n];
    build_io_matrix(&h).apply(s.values(), &mut out);
    let mut err = max_diff(direct.values(), &out);
    TwistedConvOperator::new(&h).apply(s.values(), &mut out);
    err = err.max(max_diff(direct.values(), &out));
    within(err, 1e-12)
}

fn impairment_folding() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let b = 1.92e6;
    let q = 4;
    let amps = (0..128).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let shape = PulseShape::rrc(0.5).map_err(|e| e.to_string())?;
    let train = PulseTrain::new(&shape, b, q, -64, amps).map_err(|e| e.to_string())?;
    let grid = train.natural_grid();
    let paths = [
        PathSpec::new(Complex64::new(0.8, 0.1), 0.3 / b, 120.0),
        PathSpec::new(Complex64::new(-0.2, 0.5), 2.7 / b, -800.0),
    ];
    let imp = ImpairmentSpec::new(0.6 / b, 350.0, 0.4).map_err(|e| e.to_string())?;
    let mp = Multipath::new(&train, &paths);
    let lhs = Impaired::new(&mp, imp).sample(&grid);
    let spec = zakotfs::ChannelSpec {
        paths: paths.to_vec(),
        impairments: imp,
        noise_psd: 0.0,
        tau_max: 3.0 / b,
        nu_max: 1000.0,
        seed: 0,
    };
    let folded = zakotfs::fold_impairments(&spec);
    let rhs = Multipath::new(&train, &folded).sample(&grid);
    within(max_diff(&lhs, &rhs), 1e-9)
}

fn preamble_and_kay() -> Result<String, String> {
    let p = make_preamble(256, 25).map_err(|e| e.to_string())?;
    let side = (1..256)
        .map(|lag| (0..256).map(|i| p.samples[(i + lag) % 256] * p.samples[i].conj()).sum::<Complex64>().norm())
        .fold(0.0, f64::max)
        / 256.0;
    if side > 0.05 {
        return Err(format!("periodic sidelobe {side:.3} > 0.05"));
    }
    let rate = 7.68e6;
    let f = 7.5e3;
    let tone: Vec<Complex64> = (0..1024).map(|i| Complex64::from_polar(1.0, 2.0 * PI * f * i as f64 / rate)).collect();
    let est = kay_cfo(&tone, rate).map_err(|e| e.to_string())?;
    let rel = (est - f).abs() / f;
    if rel > 1e-6 {
        return Err(format!("Kay estimate {est} Hz for a {f} Hz tone"));
    }
    Ok(format!("sidelobe {side:.2e}, Kay relative error {rel:.1e}"))
}

fn loopback(order: usize) -> Result<String, String> {
    let mut cfg = ExperimentConfig::reference();
    cfg.layout.modulation_order = order;
    cfg.sync.enabled = false;
    cfg.channel.random_phase = false;
    cfg.channel.paths = vec![crate::config::PathEntry { gain_db: 0.0, phase: 0.0, delay_bins: 0.0, doppler_hz: 0.0 }];
    let link = Link::new(&cfg).map_err(|e| e.to_string())?;
    let r = run_trial(&link, None, 0).map_err(|e| e.to_string())?;
    if r.bit_errors == 0 {
        Ok(format!("0 / {} bit errors", r.bits_sent))
    } else {
        Err(format!("{} / {} bit errors", r.bit_errors, r.bits_sent))
    }
}

fn iq_roundtrip() -> Result<String, String> {
    let s: Vec<Complex64> = (0..100).map(|i| Complex64::new(i as f64 * 0.01, -0.5)).collect();
    let f = crate::iq::decode(&crate::iq::encode(1e6, &s)).map_err(|e| e.to_string())?;
    within(max_diff(&s, &f.samples), 1e-6)
}

fn time_grid_sanity() -> Result<String, String> {
    let g = TimeGrid::new(-8, 16, 4, 1.92e6).map_err(|e| e.to_string())?;
    within((g.time(8) - 0.0).abs(), 0.0)
}

type CheckFn = fn() -> Result<String, String>;

pub fn run() -> Vec<Check> {
    let checks: [(&'static str, CheckFn); 8] = [
        ("zak round trip and Parseval", zak_roundtrip),
        ("I/O operators match twisted convolution", io_operator),
        ("impairment folding", impairment_folding),
        ("preamble sidelobes and Kay estimator", preamble_and_kay),
        ("noiseless loopback 4-QAM", || loopback(4)),
        ("noiseless loopback 16-QAM", || loopback(16)),
        ("IQ encode/decode", iq_roundtrip),
        ("time grid origin", time_grid_sanity),
    ];
    checks.into_iter().map(|(name, f)| Check { name, outcome: f() }).collect()
}
