//! Minimal deterministic SVG plots.

use std::fmt::Write as _;

use zakotfs::Complex64;

use crate::sweep::BerCurve;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 60.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn header(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title)).unwrap();
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// BER against SNR on a log axis; zero-BER points are drawn at the floor.
pub fn ber_chart(curves: &[BerCurve]) -> String {
    let mut out = String::new();
    header(&mut out, "BER versus SNR");
    let xs: Vec<f64> = curves.iter().flat_map(|c| c.points.iter().map(|p| p.snr_db)).collect();
    let (mut x0, mut x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let floor = curves
        .iter()
        .flat_map(|c| c.points.iter().filter(|p| p.bits > 0).map(|p| 1.0 / p.bits as f64))
        .fold(1.0f64, f64::min)
        .max(1e-9);
    let (d0, d1) = (floor.log10().floor(), 0.0);
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| {
        let l = y.max(floor).log10();
        PAD + (d1 - l) / (d1 - d0) * (H - 2.0 * PAD)
    };
    writeln!(out, r##"<g stroke="#cccccc">"##).unwrap();
    for d in (d0 as i64)..=(d1 as i64) {
        let y = py(10f64.powi(d as i32));
        writeln!(out, r#"<line x1="{PAD:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#, W - PAD).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" stroke="none">1e{d}</text>"#, PAD - 6.0, y + 4.0).unwrap();
    }
    let mut ticks: Vec<f64> = xs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for x in ticks {
        let xx = px(x);
        writeln!(out, r#"<line x1="{xx:.2}" y1="{PAD:.2}" x2="{xx:.2}" y2="{:.2}"/>"#, H - PAD).unwrap();
        writeln!(out, r#"<text x="{xx:.2}" y="{:.2}" text-anchor="middle" stroke="none">{x}</text>"#, H - PAD + 16.0).unwrap();
    }
    writeln!(out, "</g>").unwrap();
    writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">SNR (dB)</text>"#, W / 2.0, H - 16.0).unwrap();
    writeln!(out, r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">BER</text>"#, H / 2.0, H / 2.0).unwrap();
    for (i, c) in curves.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let pts: Vec<String> = c.points.iter().map(|p| format!("{:.2},{:.2}", px(p.snr_db), py(p.ber))).collect();
        writeln!(out, r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#, pts.join(" ")).unwrap();
        for p in &c.points {
            let (x, y) = (px(p.snr_db), py(p.ber));
            let (lo, hi) = (py((p.ber - p.ci95).max(floor)), py(p.ber + p.ci95));
            writeln!(out, r#"<line x1="{x:.2}" y1="{lo:.2}" x2="{x:.2}" y2="{hi:.2}" stroke="{colour}"/>"#).unwrap();
            writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{colour}"/>"#).unwrap();
        }
        let ly = PAD + 16.0 + 16.0 * i as f64;
        writeln!(out, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/>"#, W - PAD - 150.0, W - PAD - 130.0).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, W - PAD - 125.0, ly + 4.0, escape(&c.label)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter of equalized symbols with the reference points overlaid.
pub fn constellation(title: &str, symbols: &[Complex64], reference: &[Complex64]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let lim = reference.iter().map(|p| p.re.abs().max(p.im.abs())).fold(1.0f64, f64::max) * 1.6;
    let side = H - 2.0 * PAD;
    let x0 = (W - side) / 2.0;
    let px = |v: f64| x0 + (v.clamp(-lim, lim) + lim) / (2.0 * lim) * side;
    let py = |v: f64| PAD + (lim - v.clamp(-lim, lim)) / (2.0 * lim) * side;
    writeln!(out, r##"<rect x="{x0:.2}" y="{PAD:.2}" width="{side:.2}" height="{side:.2}" fill="none" stroke="#888888"/>"##).unwrap();
    writeln!(out, r##"<line x1="{x0:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#cccccc"/>"##, py(0.0), x0 + side, py(0.0)).unwrap();
    writeln!(out, r##"<line x1="{:.2}" y1="{PAD:.2}" x2="{:.2}" y2="{:.2}" stroke="#cccccc"/>"##, px(0.0), px(0.0), PAD + side).unwrap();
    writeln!(out, r##"<g fill="#1f77b4" fill-opacity="0.5">"##).unwrap();
    for s in symbols {
        writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#, px(s.re), py(s.im)).unwrap();
    }
    writeln!(out, "</g>").unwrap();
    writeln!(out, r##"<g fill="none" stroke="#d62728" stroke-width="1.5">"##).unwrap();
    for p in reference {
        writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="5"/>"#, px(p.re), py(p.im)).unwrap();
    }
    writeln!(out, "</g>").unwrap();
    writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">In-phase</text>"#, W / 2.0, H - 16.0).unwrap();
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::BerPoint;

    #[test]
    fn chart_is_well_formed_and_deterministic() {
        let curve = BerCurve {
            label: "a <b>".into(),
            points: vec![
                BerPoint { snr_db: 10.0, ber: 0.1, ci95: 0.01, trials: 1, errors: 10, bits: 100, sync_failures: 0 },
                BerPoint { snr_db: 20.0, ber: 0.0, ci95: 0.0, trials: 1, errors: 0, bits: 100, sync_failures: 0 },
            ],
        };
        let a = ber_chart(std::slice::from_ref(&curve));
        assert_eq!(a, ber_chart(&[curve]));
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains("a &lt;b&gt;"));
        assert!(!a.contains("NaN") && !a.contains("inf"));
    }

    #[test]
    fn scatter_draws_every_symbol() {
        let pts = zakotfs::Constellation::qam4().points().to_vec();
        let svg = constellation("t", &pts, &pts);
        assert_eq!(svg.matches("<circle").count(), 8);
    }
}
