//! TOML run configuration. One optional section per subcommand; every key
//! has a default and unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::Context;
use fp_biphoton::clicksim::DetectorModel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan2d: Option<Scan2d>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_single: Option<ScanSingle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_scan: Option<SpectralScan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_readout: Option<SpectralReadoutConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_check: Option<OracleCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<Simulate>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Degenerate pair at 785 nm per photon, 1 cm cavities.
const OMEGA_DEFAULT: f64 = 2.4e15;
const D_DEFAULT: f64 = 1e-2;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scan2d {
    pub t: f64,
    /// `TT`, `RR`, `RT` or `TR`.
    pub channel: String,
    pub offset_m: i64,
    pub omega_left: f64,
    pub omega_right: f64,
    pub d_left: f64,
    pub d_right: f64,
    /// Phase periods covered along each axis.
    pub periods: f64,
    /// Grid points per axis, end points included.
    pub steps: usize,
    /// Move the left reference length to the nearest joint resonance.
    pub resonant_reference: bool,
}

impl Default for Scan2d {
    fn default() -> Self {
        Self {
            t: 0.5,
            channel: "TT".into(),
            offset_m: 0,
            omega_left: OMEGA_DEFAULT,
            omega_right: OMEGA_DEFAULT,
            d_left: D_DEFAULT,
            d_right: D_DEFAULT,
            periods: 2.0,
            steps: 101,
            resonant_reference: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSingle {
    pub t_values: Vec<f64>,
    pub omega_left: f64,
    pub omega_right: f64,
    pub d: f64,
    pub periods: f64,
    pub steps: usize,
    pub resonant_reference: bool,
}

impl Default for ScanSingle {
    fn default() -> Self {
        Self {
            t_values: vec![0.5, 0.2],
            omega_left: OMEGA_DEFAULT,
            omega_right: OMEGA_DEFAULT,
            d: D_DEFAULT,
            periods: 2.0,
            steps: 401,
            resonant_reference: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeShape {
    /// Constant over the whole window.
    Flat,
    /// Gaussian of standard deviation `width_round_trips` round trips.
    Gaussian,
    /// Supported on the first half round trip only.
    Narrow,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvelopeSpec {
    pub shape: EnvelopeShape,
    pub samples_per_round_trip: usize,
    pub round_trips: usize,
    pub width_round_trips: f64,
    /// Modulation frequencies `Ω_k`, as fractions of the free spectral range.
    pub components: Vec<f64>,
}

impl Default for EnvelopeSpec {
    fn default() -> Self {
        Self {
            shape: EnvelopeShape::Flat,
            samples_per_round_trip: 100,
            round_trips: 3000,
            width_round_trips: 500.0,
            components: vec![0.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralScan {
    pub t: f64,
    pub omega_left: f64,
    pub omega_right: f64,
    pub d: f64,
    pub periods: f64,
    pub steps: usize,
    pub resonant_reference: bool,
    /// Round trips kept in the sum; 0 picks one from the mirror reflectivity.
    pub l_max: u64,
    /// `tau_seconds,re,im` CSV; overrides `envelope` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_path: Option<PathBuf>,
    pub envelope: EnvelopeSpec,
}

impl Default for SpectralScan {
    fn default() -> Self {
        Self {
            t: 0.2,
            omega_left: OMEGA_DEFAULT,
            omega_right: OMEGA_DEFAULT,
            d: 1.5e-2,
            periods: 1.0,
            steps: 400,
            resonant_reference: true,
            l_max: 0,
            envelope_path: None,
            envelope: EnvelopeSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralReadoutConfig {
    /// Scan CSV written by `spectral-scan`.
    pub scan_path: PathBuf,
    pub t: f64,
    /// rad/s; when absent it is `πc/d` at the first scan point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free_spectral_range: Option<f64>,
}

impl Default for SpectralReadoutConfig {
    fn default() -> Self {
        Self { scan_path: PathBuf::from("scan.csv"), t: 0.2, free_spectral_range: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleCheck {
    pub t_values: Vec<f64>,
    /// Evenly spaced phases `k·2π/theta_count`, unless `theta_values` is set.
    pub theta_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_values: Option<Vec<f64>>,
    pub m_max: u64,
    /// Path-sum truncation. When absent each `T` gets the smallest value of
    /// at least [`MIN_AUTO_L_MAX`] whose tail bound is below `tolerance/10`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_max: Option<u64>,
    pub tolerance: f64,
}

pub const MIN_AUTO_L_MAX: u64 = 100;

impl Default for OracleCheck {
    fn default() -> Self {
        Self {
            t_values: vec![0.2, 0.5, 0.8],
            theta_count: 8,
            theta_values: None,
            m_max: 5,
            l_max: None,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulate {
    pub t: f64,
    pub theta: f64,
    pub n_pairs: u64,
    pub round_trip_time: f64,
    /// Defaults to `(2·max|m| + 4)·round_trip_time`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_interval: Option<f64>,
    /// Defaults to `round_trip_time/4`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matching_window: Option<f64>,
    /// Divide estimates by the detector-pair efficiency before comparing.
    pub correct_efficiency: bool,
    /// Optional click-stream output: NDJSON for `.ndjson`/`.jsonl`, CSV otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clicks_path: Option<PathBuf>,
    pub detectors: DetectorModel,
}

impl Default for Simulate {
    fn default() -> Self {
        Self {
            t: 0.5,
            theta: 0.0,
            n_pairs: 1_000_000,
            round_trip_time: 1e-9,
            pair_interval: None,
            matching_window: None,
            correct_efficiency: true,
            clicks_path: None,
            detectors: DetectorModel::ideal(),
        }
    }
}
