//! Versioned TOML experiment configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zakotfs::{
    build_layout, channel::wrap_phase, Complex64, Constellation, FrameLayout, FrameParams,
    ImpairmentSpec, PathSpec, PulseShape, SupportKind, SupportRegion,
};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn bad(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), reason: reason.into() }
}

fn from_core(section: &str, e: zakotfs::Error) -> ConfigError {
    match e {
        zakotfs::Error::InvalidParameter { field, reason } => bad(&format!("{section}.{field}"), reason),
        other => bad(section, other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub frame: FrameSection,
    #[serde(default)]
    pub layout: LayoutSection,
    #[serde(default)]
    pub shape: ShapeSection,
    pub channel: ChannelSection,
    #[serde(default)]
    pub sync: SyncSection,
    #[serde(default)]
    pub estimation: EstimationSection,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSection {
    pub m: usize,
    pub n: usize,
    /// Hz.
    pub nu_p: f64,
    /// Seconds; checked against `1 / nu_p` when given.
    pub tau_p: Option<f64>,
    /// Hz; checked against `m nu_p` when given.
    pub bandwidth: Option<f64>,
    /// Seconds; checked against `n tau_p` when given.
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutSection {
    /// Maximum path delay in delay bins (`1/B`).
    pub tau_max_bins: f64,
    /// Timing-offset margin in delay bins.
    pub dt_margin_bins: f64,
    pub pilot_boost_db: f64,
    pub modulation_order: usize,
}

impl Default for LayoutSection {
    fn default() -> Self {
        Self { tau_max_bins: 1.0, dt_margin_bins: 1.0, pilot_boost_db: 10.0, modulation_order: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Rrc,
    Sinc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeSection {
    pub family: Family,
    pub beta: f64,
    /// Delay-filter half-width in `1/B`; omitted for an ideal sinc.
    pub span: Option<usize>,
    pub tail_limit: f64,
    pub oversampling: usize,
}

impl Default for ShapeSection {
    fn default() -> Self {
        Self {
            family: Family::Rrc,
            beta: 0.5,
            span: None,
            tail_limit: zakotfs::waveform::DEFAULT_TAIL_LIMIT,
            oversampling: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathEntry {
    /// Power gain in dB.
    #[serde(default)]
    pub gain_db: f64,
    /// Radians.
    #[serde(default)]
    pub phase: f64,
    /// Delay bins (`1/B`).
    #[serde(default)]
    pub delay_bins: f64,
    /// Hz.
    #[serde(default)]
    pub doppler_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImpairmentSection {
    /// Timing offset in delay bins.
    pub dt_bins: f64,
    /// Carrier frequency offset in Hz.
    pub eps0_hz: f64,
    /// Radians.
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub paths: Vec<PathEntry>,
    #[serde(default)]
    pub impairments: ImpairmentSection,
    /// Draw an independent uniform phase per path and trial.
    #[serde(default)]
    pub random_phase: bool,
    /// Declared Doppler bound in Hz.
    #[serde(default = "default_nu_max")]
    pub nu_max_hz: f64,
}

fn default_nu_max() -> f64 {
    1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfoCorrection {
    TimeDomain,
    ChannelFolded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncSection {
    pub enabled: bool,
    pub preamble_length: usize,
    pub root: u64,
    /// Zero chips between preamble and frame.
    pub gap: usize,
    pub threshold: f64,
    pub cfo_correction: CfoCorrection,
}

impl Default for SyncSection {
    fn default() -> Self {
        Self {
            enabled: true,
            preamble_length: zakotfs::sync::DEFAULT_LENGTH,
            root: zakotfs::sync::DEFAULT_ROOT,
            gap: 64,
            threshold: zakotfs::sync::DEFAULT_THRESHOLD,
            cfo_correction: CfoCorrection::TimeDomain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSource {
    Genie,
    Guard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    C1,
    C2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationSection {
    pub support: Support,
    pub noise: NoiseSource,
}

impl Default for EstimationSection {
    fn default() -> Self {
        Self { support: Support::C1, noise: NoiseSource::Genie }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub csv: String,
    pub svg: String,
    /// File-name prefix for per-SNR constellation plots.
    pub constellation_prefix: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            csv: "ber.csv".into(),
            svg: "ber.svg".into(),
            constellation_prefix: "constellation".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// The shipped `configs/table1.toml`: 64 x 64 frame at 30 kHz, RRC 0.5,
    /// two paths 3 dB apart, 700 Hz CFO.
    pub fn reference() -> Self {
        Self {
            version: CONFIG_VERSION,
            frame: FrameSection { m: 64, n: 64, nu_p: 30e3, tau_p: None, bandwidth: None, duration: None },
            layout: LayoutSection::default(),
            shape: ShapeSection { span: Some(zakotfs::waveform::DEFAULT_SPAN), ..ShapeSection::default() },
            channel: ChannelSection {
                paths: vec![
                    PathEntry { gain_db: 0.0, phase: 0.0, delay_bins: 0.0, doppler_hz: 0.0 },
                    PathEntry { gain_db: -3.0, phase: 0.0, delay_bins: 1.0, doppler_hz: 468.75 },
                ],
                impairments: ImpairmentSection { dt_bins: 0.0, eps0_hz: 700.0, phi: 0.3 },
                random_phase: true,
                nu_max_hz: 1000.0,
            },
            sync: SyncSection::default(),
            estimation: EstimationSection::default(),
            run: RunSection { snr_db: vec![10.0, 15.0, 20.0, 25.0], trials: 50, seed: 1, workers: 0 },
            output: OutputSection { dir: PathBuf::from("out/table1"), ..OutputSection::default() },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(bad("version", format!("unsupported version {} (expected {CONFIG_VERSION})", self.version)));
        }
        let params = self.frame_params()?;
        self.frame_layout(&params)?;
        self.pulse_shape()?;
        self.constellation()?;
        if self.shape.oversampling < 2 {
            return Err(bad("shape.oversampling", "must be at least 2"));
        }
        if self.channel.paths.is_empty() {
            return Err(bad("channel.paths", "at least one path is required"));
        }
        for (i, p) in self.channel.paths.iter().enumerate() {
            for (name, v) in [("gain_db", p.gain_db), ("phase", p.phase), ("delay_bins", p.delay_bins), ("doppler_hz", p.doppler_hz)] {
                if !v.is_finite() {
                    return Err(bad(&format!("channel.paths[{i}].{name}"), "must be finite"));
                }
            }
            if p.delay_bins < 0.0 || p.delay_bins > self.layout.tau_max_bins + 1e-9 {
                return Err(bad(
                    &format!("channel.paths[{i}].delay_bins"),
                    format!("{} outside [0, layout.tau_max_bins = {}]", p.delay_bins, self.layout.tau_max_bins),
                ));
            }
            if p.doppler_hz.abs() > self.channel.nu_max_hz {
                return Err(bad(
                    &format!("channel.paths[{i}].doppler_hz"),
                    format!("|{}| exceeds channel.nu_max_hz = {}", p.doppler_hz, self.channel.nu_max_hz),
                ));
            }
        }
        self.impairments(&params)?;
        if self.sync.enabled {
            zakotfs::make_preamble(self.sync.preamble_length, self.sync.root).map_err(|e| bad("sync.root", e.to_string()))?;
            if !(self.sync.threshold > 0.0 && self.sync.threshold <= 1.0) {
                return Err(bad("sync.threshold", "must lie in (0, 1]"));
            }
        }
        if self.run.snr_db.is_empty() {
            return Err(bad("run.snr_db", "must list at least one SNR"));
        }
        if let Some(i) = self.run.snr_db.iter().position(|s| !s.is_finite()) {
            return Err(bad(&format!("run.snr_db[{i}]"), "must be finite"));
        }
        if self.run.trials == 0 {
            return Err(bad("run.trials", "must be at least 1"));
        }
        Ok(())
    }

    pub fn frame_params(&self) -> Result<FrameParams, ConfigError> {
        let f = &self.frame;
        let tau_p = f.tau_p.unwrap_or(1.0 / f.nu_p);
        let bandwidth = f.bandwidth.unwrap_or(f.m as f64 * f.nu_p);
        let duration = f.duration.unwrap_or(f.n as f64 * tau_p);
        FrameParams::from_parts(f.m, f.n, f.nu_p, tau_p, bandwidth, duration).map_err(|e| from_core("frame", e))
    }

    pub fn frame_layout(&self, params: &FrameParams) -> Result<FrameLayout, ConfigError> {
        let bin = params.delay_bin();
        build_layout(params, self.layout.tau_max_bins * bin, self.layout.dt_margin_bins * bin)
            .map_err(|e| from_core("layout", e))
    }

    pub fn pulse_shape(&self) -> Result<PulseShape, ConfigError> {
        let s = &self.shape;
        let shape = match s.family {
            Family::Rrc => {
                let base = PulseShape::rrc(s.beta).map_err(|e| from_core("shape", e))?;
                base.with_span(s.span.unwrap_or(zakotfs::waveform::DEFAULT_SPAN))
            }
            Family::Sinc => match s.span {
                Some(span) => PulseShape::truncated_sinc(span),
                None => PulseShape::sinc(),
            },
        }
        .with_tail_limit(s.tail_limit);
        shape.check_tail().map_err(|e| bad("shape.span", e.to_string()))?;
        Ok(shape)
    }

    pub fn constellation(&self) -> Result<Constellation, ConfigError> {
        Constellation::qam(self.layout.modulation_order).map_err(|e| from_core("layout", e))
    }

    pub fn pilot_amp(&self) -> f64 {
        10f64.powf(self.layout.pilot_boost_db / 20.0)
    }

    pub fn support(&self, layout: &FrameLayout) -> Result<SupportRegion, ConfigError> {
        let kind = match self.estimation.support {
            Support::C1 => SupportKind::C1,
            Support::C2 => SupportKind::C2,
        };
        SupportRegion::from_layout(layout, kind).map_err(|e| bad("estimation.support", e.to_string()))
    }

    /// Paths with the given per-path extra phases.
    pub fn paths(&self, params: &FrameParams, extra_phase: &[f64]) -> Vec<PathSpec> {
        let bin = params.delay_bin();
        self.channel
            .paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let ph = p.phase + extra_phase.get(i).copied().unwrap_or(0.0);
                PathSpec::new(Complex64::from_polar(10f64.powf(p.gain_db / 20.0), ph), p.delay_bins * bin, p.doppler_hz)
            })
            .collect()
    }

    pub fn impairments(&self, params: &FrameParams) -> Result<ImpairmentSpec, ConfigError> {
        let i = &self.channel.impairments;
        if !(i.phi.is_finite()) {
            return Err(bad("channel.impairments.phi", "must be finite"));
        }
        ImpairmentSpec::new(i.dt_bins * params.delay_bin(), i.eps0_hz, wrap_phase(i.phi))
            .map_err(|e| from_core("channel.impairments", e))
    }
}

/// Uniform phase in `[-pi, pi)`.
pub fn uniform_phase(u: f64) -> f64 {
    -PI + 2.0 * PI * u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_roundtrips_through_toml() {
        let cfg = ExperimentConfig::reference();
        let text = cfg.to_toml();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = ExperimentConfig::reference().to_toml();
        text = text.replace("[frame]\n", "[frame]\ncolour = 3\n");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn inconsistent_periods_name_the_field() {
        let mut cfg = ExperimentConfig::reference();
        cfg.frame.tau_p = Some(33.3e-6);
        match cfg.validate() {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "frame.tau_p"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn field_checks() {
        let mut cfg = ExperimentConfig::reference();
        cfg.run.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::reference();
        cfg.channel.paths[1].delay_bins = 5.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::reference();
        cfg.version = 2;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::reference();
        cfg.sync.root = 64;
        assert!(cfg.validate().is_err());
    }
}
