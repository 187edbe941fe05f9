//! Cross-module checks of the transmit/receive chain.

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zakotfs::channel::add_noise;
use zakotfs::{
    apply_paths, build_layout, correct, detect_timing, dzt, estimate, idzt, kay_cfo, make_preamble,
    map_bits, matched_filter, predict_io, sample_and_periodize, AnalogSignal, Complex64, Constellation,
    DDGrid, FrameLayout, FrameParams, GridRole, PathSpec, PulseShape, PulseTrain, SupportKind,
    SupportRegion, SyncResult, TimeGrid, Waveform,
};

type C = Complex64;

fn chain(x: &DDGrid, shape: &PulseShape, params: &FrameParams, q: usize, paths: &[PathSpec]) -> DDGrid {
    let train = PulseTrain::frame(&idzt(x), shape, params, q).unwrap();
    let grid = train.natural_grid();
    let r = apply_paths(&train, paths, &grid).unwrap();
    let y = matched_filter(&r, shape, params);
    dzt(&sample_and_periodize(&y, shape, params).unwrap())
}

fn pilot_only(m: usize, n: usize) -> DDGrid {
    let mut g = DDGrid::zeros(m, n, GridRole::Symbols);
    g[(m / 2, n / 2)] = C::new(1.0, 0.0);
    g
}

fn full_support(m: usize, n: usize) -> (FrameLayout, SupportRegion) {
    let layout = FrameLayout::new(m, n, (m / 2, n / 2), m / 2..m / 2 + 1).unwrap();
    let support = SupportRegion::new(SupportKind::C2, 0, m as i64, (m / 2, n / 2), m, n).unwrap();
    (layout, support)
}

#[test]
fn identity_channel_estimate_is_a_unit_tap() {
    let params = FrameParams::reference();
    let (m, n) = (params.m, params.n);
    let y = chain(&pilot_only(m, n), &PulseShape::sinc(), &params, 4, &[PathSpec::new(C::new(1.0, 0.0), 0.0, 0.0)]);
    let (layout, support) = full_support(m, n);
    let h = estimate(&y, &layout, &support, 1.0).unwrap();
    assert_eq!(h.peak(), (0, 0));
    assert!((h.tap(0, 0) - C::new(1.0, 0.0)).norm() < 1e-6);
    let off = h.energy() - h.tap(0, 0).norm_sqr();
    assert!(off < 0.01 * h.energy(), "off-peak energy {off}");
}

#[test]
fn single_integer_path_peaks_at_its_bin() {
    let params = FrameParams::reference();
    let layout = build_layout(&params, params.delay_bin(), params.delay_bin()).unwrap();
    let support = SupportRegion::from_layout(&layout, SupportKind::C1).unwrap();
    let c = Constellation::qam4();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bits: Vec<u8> = (0..layout.bits_required(&c)).map(|_| rng.random_range(0..2)).collect();
    let x = map_bits(&bits, &c, &layout, 10f64.sqrt()).unwrap();
    for shape in [PulseShape::rrc(0.5).unwrap(), PulseShape::sinc()] {
        for (k0, l0) in [(0i64, 0i64), (1, 3), (0, -7), (1, -32)] {
            let path = PathSpec::new(
                C::from_polar(1.0, 0.7),
                k0 as f64 * params.delay_bin(),
                l0 as f64 * params.doppler_bin(),
            );
            let y = chain(&x, &shape, &params, 4, &[path]);
            let h = estimate(&y, &layout, &support, 10f64.sqrt()).unwrap();
            assert_eq!(h.peak(), (k0, l0), "{:?}", shape.family());
        }
    }
}

#[test]
fn twisted_convolution_predicts_the_rrc_chain() {
    let params = FrameParams::new(8, 8, 30e3).unwrap();
    let (b, t) = (params.bandwidth, params.duration);
    let shape = PulseShape::rrc(0.5).unwrap();
    let paths = [PathSpec::new(C::new(0.8, 0.0), 1.0 / b, 2.0 / t), PathSpec::new(C::new(0.0, 0.6), 3.0 / b, -1.0 / t)];
    let (layout, support) = full_support(8, 8);
    let h = estimate(&chain(&pilot_only(8, 8), &shape, &params, 4, &paths), &layout, &support, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = DDGrid::from_values(
        8,
        8,
        GridRole::Symbols,
        (0..64).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect(),
    )
    .unwrap();
    let y = chain(&x, &shape, &params, 4, &paths);
    let p = predict_io(&x, &h);
    let num: f64 = y.values().iter().zip(p.values()).map(|(a, b)| (a - b).norm_sqr()).sum();
    assert!((num / y.energy()).sqrt() < 5e-3);
}

fn preamble_signal(offset: i64, len: usize) -> (AnalogSignal, Vec<C>) {
    let (b, q) = (1.92e6, 4);
    let shape = PulseShape::rrc(0.5).unwrap();
    let pre = make_preamble(256, 25).unwrap();
    let replica = pre.replica(&shape, q, b).unwrap();
    let train = PulseTrain::new(&shape, b, q, 0, pre.samples).unwrap();
    let grid = TimeGrid::new(-offset, len, q, b).unwrap();
    let samples = train.sample(&grid);
    (AnalogSignal::new(grid, samples).unwrap(), replica)
}

#[test]
fn detection_is_shift_equivariant() {
    let (r0, replica) = preamble_signal(100, 2048);
    let base = detect_timing(&r0, &replica, 0.3).unwrap().start_index;
    assert_eq!(base, 100);
    for extra in [1usize, 7, 64, 333] {
        let mut samples = vec![C::new(0.0, 0.0); extra];
        samples.extend_from_slice(&r0.samples);
        let grid = TimeGrid { start: r0.grid.start - extra as i64, len: samples.len(), ..r0.grid };
        let r = AnalogSignal::new(grid, samples).unwrap();
        assert_eq!(detect_timing(&r, &replica, 0.3).unwrap().start_index, base + extra);
    }
}

#[test]
fn correct_undoes_a_known_offset_and_cfo() {
    let (r0, _) = preamble_signal(0, 1500);
    let (m, f) = (37usize, 2_345.0);
    let rate = r0.grid.rate();
    let mut samples = vec![C::new(0.0, 0.0); m];
    samples.extend_from_slice(&r0.samples);
    for (i, v) in samples.iter_mut().enumerate().skip(m) {
        *v *= C::from_polar(1.0, 2.0 * PI * f * (i - m) as f64 / rate);
    }
    let grid = TimeGrid { start: -(m as i64), len: samples.len(), ..r0.grid };
    let r = AnalogSignal::new(grid, samples).unwrap();
    let fixed = correct(&r, &SyncResult { start_index: m, cfo_hat: f, peak_metric: 1.0 }).unwrap();
    let err = fixed.samples.iter().zip(&r0.samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-12);
    assert_eq!(fixed.grid.start, 0);

    let half = correct(&r, &SyncResult { start_index: m, cfo_hat: f / 2.0, peak_metric: 1.0 }).unwrap();
    let z: Vec<C> = half.samples.iter().zip(&r0.samples).map(|(a, b)| a * b.conj()).collect();
    let residual = kay_cfo(&z[..1024], rate).unwrap();
    assert!((residual - f / 2.0).abs() < 1e-6 * f, "{residual}");
}

#[test]
fn zero_noise_detection_survives_moderate_noise() {
    let (mut r, replica) = preamble_signal(250, 3000);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    add_noise(&mut r.samples, 0.3, &mut rng);
    let s = detect_timing(&r, &replica, 0.3).unwrap();
    assert!((s.start_index as i64 - 250).abs() <= 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kay_is_unbiased_across_the_unambiguous_range(frac in -0.45f64..0.45) {
        let rate = 7.68e6;
        let f = frac * rate;
        let tone: Vec<C> = (0..512).map(|n| C::from_polar(1.0, 2.0 * PI * f * n as f64 / rate)).collect();
        let est = kay_cfo(&tone, rate).unwrap();
        prop_assert!((est - f).abs() <= 1e-6 * f.abs().max(1.0));
    }

    #[test]
    fn loopback_recovers_symbols(seed in 0u64..1000) {
        let params = FrameParams::new(16, 8, 30e3).unwrap();
        let layout = build_layout(&params, params.delay_bin(), 0.0).unwrap();
        let c = Constellation::qam16();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits: Vec<u8> = (0..layout.bits_required(&c)).map(|_| rng.random_range(0..2)).collect();
        let x = map_bits(&bits, &c, &layout, 3.0).unwrap();
        let y = chain(&x, &PulseShape::sinc(), &params, 4, &[PathSpec::new(C::new(1.0, 0.0), 0.0, 0.0)]);
        prop_assert_eq!(zakotfs::demap_symbols(&y, &layout, &c), bits);
    }
}
