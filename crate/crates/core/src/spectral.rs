//! Finite-bandwidth entanglement: the pair envelope `φ(τ)` and the
//! coincidence rate it produces behind the dual cavity.
//!
//! With short single-photon pulses only `φ` matters. The transmission
//! coincidence amplitude becomes
//!
//! ```text
//! A(τ) = T⁴ Σ_{l=0}^{l_max} R^{4l} e^{iθl} φ(τ + l·t_rt)
//! ```
//!
//! where `t_rt = 2d/c` is the round-trip time. `t_rt` must be an integer
//! number of envelope samples; nothing is interpolated. Scanning `d` therefore
//! acts as a windowed Fourier transform of `φ`: a modulation `e^{iΩτ}` moves
//! the resonance to `θ = −Ω·t_rt`.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::biphoton::{resonance_linewidth, Linewidth};
use crate::mirrors::MirrorCoefficients;
use crate::phase::{reduce_mod_2pi, PhaseError, DoubleDouble, reduce_mod_2pi_dd, SPEED_OF_LIGHT};

/// Largest accepted mismatch between the round-trip time and the nearest
/// whole number of samples, as a fraction of one sample.
pub const COMMENSURABILITY_TOLERANCE: f64 = 1e-2;

/// Peaks below this fraction of the scan's max-min span are ignored.
pub const PEAK_PROMINENCE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("envelope needs tau_step > 0 and at least 2 finite samples")]
    InvalidGrid,
    #[error("envelope has zero or non-finite norm")]
    ZeroNorm,
    #[error(
        "round-trip time {round_trip_time:e} s is not a whole number of samples (step {tau_step:e} s); \
         nearest commensurate round trip is {nearest_round_trip:e} s, i.e. d = {nearest_length:e} m"
    )]
    NonCommensurate {
        round_trip_time: f64,
        tau_step: f64,
        nearest_round_trip: f64,
        nearest_length: f64,
    },
    #[error("cavity length {0} must be positive and finite")]
    InvalidLength(f64),
    #[error("sum frequency {0} must be positive and finite")]
    InvalidFrequency(f64),
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error("resonances are unresolved: linewidth exceeds the peak spacing")]
    Unresolved,
    #[error("scan covers {covered:.4} rad of phase, less than one free spectral range (2π)")]
    InsufficientCoverage { covered: f64 },
    #[error("free spectral range must be positive, got {0}")]
    InvalidFreeSpectralRange(f64),
    #[error("envelope CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for SpectralError {
    fn from(e: csv::Error) -> Self {
        SpectralError::Csv(e.to_string())
    }
}

/// Sampled complex envelope `φ(τ)` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFunction {
    tau_start: f64,
    tau_step: f64,
    samples: Vec<Complex64>,
}

fn trapezoid_norm_sq(samples: &[Complex64], step: f64) -> f64 {
    let n = samples.len();
    let inner: f64 = samples.iter().map(|z| z.norm_sqr()).sum();
    let ends = 0.5 * (samples[0].norm_sqr() + samples[n - 1].norm_sqr());
    (inner - ends) * step
}

impl EnvelopeFunction {
    pub fn new(tau_start: f64, tau_step: f64, samples: Vec<Complex64>) -> Result<Self, SpectralError> {
        if !(tau_step.is_finite() && tau_step > 0.0 && tau_start.is_finite())
            || samples.len() < 2
            || samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(SpectralError::InvalidGrid);
        }
        let env = Self { tau_start, tau_step, samples };
        let norm = env.norm_sq();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(SpectralError::ZeroNorm);
        }
        Ok(env)
    }

    /// Samples `f` at `tau_start + i·tau_step` for `i < len`.
    pub fn from_fn(
        tau_start: f64,
        tau_step: f64,
        len: usize,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self, SpectralError> {
        let samples = (0..len).map(|i| f(tau_start + i as f64 * tau_step)).collect();
        Self::new(tau_start, tau_step, samples)
    }

    /// Rescaled so that `∫|φ|²dτ = 1`.
    pub fn normalized(mut self) -> Self {
        let scale = 1.0 / self.norm_sq().sqrt();
        self.samples.iter_mut().for_each(|z| *z *= scale);
        self
    }

    /// `∫|φ|²dτ` by the trapezoidal rule.
    pub fn norm_sq(&self) -> f64 {
        trapezoid_norm_sq(&self.samples, self.tau_step)
    }

    pub fn tau_start(&self) -> f64 {
        self.tau_start
    }

    pub fn tau_step(&self) -> f64 {
        self.tau_step
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.tau_start + i as f64 * self.tau_step
    }

    /// Whole number of samples spanned by `round_trip_time`.
    pub fn commensurate_shift(&self, round_trip_time: f64) -> Result<usize, SpectralError> {
        let ratio = round_trip_time / self.tau_step;
        let k = ratio.round().max(1.0);
        if !ratio.is_finite() || (ratio - k).abs() > COMMENSURABILITY_TOLERANCE {
            let nearest_round_trip = k * self.tau_step;
            return Err(SpectralError::NonCommensurate {
                round_trip_time,
                tau_step: self.tau_step,
                nearest_round_trip,
                nearest_length: nearest_round_trip * SPEED_OF_LIGHT / 2.0,
            });
        }
        Ok(k as usize)
    }

    /// Reads `tau_seconds,re,im` CSV. The header row is mandatory and lines
    /// starting with `#` are skipped.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SpectralError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["tau_seconds", "re", "im"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(SpectralError::Csv(format!(
                "expected header `tau_seconds,re,im`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut taus = Vec::new();
        let mut samples = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |i: usize| -> Result<f64, SpectralError> {
                record[i].parse::<f64>().map_err(|e| {
                    SpectralError::Csv(format!("row {}: column {}: {e}", row + 1, expected[i]))
                })
            };
            taus.push(parse(0)?);
            samples.push(Complex64::new(parse(1)?, parse(2)?));
        }
        if taus.len() < 2 {
            return Err(SpectralError::InvalidGrid);
        }
        let step = (taus[taus.len() - 1] - taus[0]) / (taus.len() - 1) as f64;
        for (i, &t) in taus.iter().enumerate() {
            let expected = taus[0] + i as f64 * step;
            if (t - expected).abs() > 1e-6 * step.abs() {
                return Err(SpectralError::Csv(format!(
                    "row {}: tau {t:e} breaks the uniform grid (expected {expected:e})",
                    i + 1
                )));
            }
        }
        Self::new(taus[0], step, samples)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SpectralError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["tau_seconds", "re", "im"])?;
        for (i, z) in self.samples.iter().enumerate() {
            wtr.write_record([self.tau(i).to_string(), z.re.to_string(), z.im.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Transformed amplitude `A(τ)` on the envelope's own grid.
///
/// Uses the backward recursion `S_i = φ_i + q S_{i+k}` with `q = R⁴e^{iθ}`,
/// corrected for the truncation at `l_max`; samples shifted past the end of
/// the grid contribute zero.
pub fn windowed_coincidence_amplitude(
    envelope: &EnvelopeFunction,
    mirrors: &MirrorCoefficients,
    theta: f64,
    round_trip_time: f64,
    l_max: u64,
) -> Result<EnvelopeFunction, SpectralError> {
    let k = envelope.commensurate_shift(round_trip_time)?;
    let phi = envelope.samples();
    let n = phi.len();
    let q = Complex64::cis(theta) * mirrors.r4();
    // q^{l_max+1}; zero once it underflows
    let q_tail = Complex64::cis(theta * (l_max as f64 + 1.0)) * mirrors.r4().powf(l_max as f64 + 1.0);
    let tail_offset = (l_max as usize).saturating_add(1).saturating_mul(k);
    let mut s = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut v = phi[i];
        if i + k < n {
            v += q * s[i + k];
        }
        if let Some(j) = i.checked_add(tail_offset).filter(|&j| j < n) {
            v -= q_tail * phi[j];
        }
        s[i] = v;
    }
    let t4 = mirrors.t2() * mirrors.t2();
    s.iter_mut().for_each(|z| *z *= t4);
    Ok(EnvelopeFunction { tau_start: envelope.tau_start, tau_step: envelope.tau_step, samples: s })
}

/// Normalized coincidence rate `∫|A|²dτ / ∫|φ|²dτ`.
pub fn coincidence_rate_from_envelope(
    envelope: &EnvelopeFunction,
    mirrors: &MirrorCoefficients,
    theta: f64,
    round_trip_time: f64,
    l_max: u64,
) -> Result<f64, SpectralError> {
    let a = windowed_coincidence_amplitude(envelope, mirrors, theta, round_trip_time, l_max)?;
    Ok(trapezoid_norm_sq(&a.samples, a.tau_step) / envelope.norm_sq())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Abscissa {
    /// Cavity length `d`, metres.
    CavityLength,
    /// Joint round-trip phase, radians.
    Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub t_field: f64,
    pub l_max: u64,
    pub envelope_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub kind: Abscissa,
    pub abscissa: Vec<f64>,
    /// Joint phase of each point (reduced for cavity scans).
    pub theta: Vec<f64>,
    pub rates: Vec<f64>,
    pub metadata: ScanMetadata,
}

impl ScanResult {
    /// `d_meters,theta_rad,rate` CSV (phase scans leave `d_meters` empty).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SpectralError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["d_meters", "theta_rad", "rate"])?;
        for i in 0..self.rates.len() {
            let d = match self.kind {
                Abscissa::CavityLength => self.abscissa[i].to_string(),
                Abscissa::Phase => String::new(),
            };
            wtr.write_record([d, self.theta[i].to_string(), self.rates[i].to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_length(d: f64) -> Result<(), SpectralError> {
    if d.is_finite() && d > 0.0 {
        Ok(())
    } else {
        Err(SpectralError::InvalidLength(d))
    }
}

/// Scan of the single-cavity (or equal-arm) geometry over cavity length `d`.
///
/// Each point uses `θ = 2·ω_sum·d/c` and `t_rt = 2d/c`.
pub fn cavity_scan(
    envelope: &EnvelopeFunction,
    mirrors: &MirrorCoefficients,
    d_values: &[f64],
    sum_frequency: f64,
    l_max: u64,
    envelope_id: &str,
) -> Result<ScanResult, SpectralError> {
    if !(sum_frequency.is_finite() && sum_frequency > 0.0) {
        return Err(SpectralError::InvalidFrequency(sum_frequency));
    }
    d_values.iter().try_for_each(|&d| check_length(d))?;
    let points: Vec<(f64, f64)> = d_values
        .par_iter()
        .map(|&d| {
            let phase = DoubleDouble::product(sum_frequency, d).scale(2.0).div_f64(SPEED_OF_LIGHT);
            let theta = reduce_mod_2pi_dd(phase)?;
            let rate =
                coincidence_rate_from_envelope(envelope, mirrors, theta, 2.0 * d / SPEED_OF_LIGHT, l_max)?;
            Ok((theta, rate))
        })
        .collect::<Result<_, SpectralError>>()?;
    let (theta, rates) = points.into_iter().unzip();
    Ok(ScanResult {
        kind: Abscissa::CavityLength,
        abscissa: d_values.to_vec(),
        theta,
        rates,
        metadata: ScanMetadata { t_field: mirrors.t(), l_max, envelope_id: envelope_id.to_owned() },
    })
}

/// Scan over the joint phase at fixed round-trip time.
pub fn phase_scan(
    envelope: &EnvelopeFunction,
    mirrors: &MirrorCoefficients,
    thetas: &[f64],
    round_trip_time: f64,
    l_max: u64,
    envelope_id: &str,
) -> Result<ScanResult, SpectralError> {
    envelope.commensurate_shift(round_trip_time)?;
    let rates = thetas
        .par_iter()
        .map(|&theta| coincidence_rate_from_envelope(envelope, mirrors, theta, round_trip_time, l_max))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScanResult {
        kind: Abscissa::Phase,
        abscissa: thetas.to_vec(),
        theta: thetas.to_vec(),
        rates,
        metadata: ScanMetadata { t_field: mirrors.t(), l_max, envelope_id: envelope_id.to_owned() },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    /// Offset of the envelope's spectral component, in `[0, FSR)`.
    pub frequency_offset: f64,
    /// Peak rate.
    pub weight: f64,
    /// Peak position in phase, in `[0, 2π)`.
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReadoutWarning {
    /// Offsets are only known modulo the free spectral range.
    Aliased { free_spectral_range: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReadout {
    pub peaks: Vec<SpectralPeak>,
    /// Half the resonance FWHM expressed as a frequency, rad/s.
    pub half_linewidth: f64,
    pub warnings: Vec<ReadoutWarning>,
}

fn unwrap_phases(theta: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(theta.len());
    let mut offset = 0.0;
    for (i, &t) in theta.iter().enumerate() {
        if i > 0 {
            let d = t - theta[i - 1];
            if d > std::f64::consts::PI {
                offset -= TAU;
            } else if d < -std::f64::consts::PI {
                offset += TAU;
            }
        }
        out.push(t + offset);
    }
    out
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = reduce_mod_2pi(a - b);
    d.min(TAU - d)
}

/// Maps scan peaks back to spectral offsets of the envelope.
///
/// A component `e^{iΩτ}` resonates at `θ ≡ −Ω·t_rt = −2π Ω/FSR`, so every
/// local maximum at phase `θ_p` reads out as `Ω = (−θ_p/2π mod 1)·FSR`.
/// Peak positions are refined by a three-point parabola.
pub fn spectral_readout(
    scan: &ScanResult,
    mirrors: &MirrorCoefficients,
    free_spectral_range: f64,
) -> Result<SpectralReadout, SpectralError> {
    if !(free_spectral_range.is_finite() && free_spectral_range > 0.0) {
        return Err(SpectralError::InvalidFreeSpectralRange(free_spectral_range));
    }
    let fwhm = match resonance_linewidth(mirrors) {
        Ok(Linewidth::Resolved { fwhm }) if fwhm < TAU => fwhm,
        _ => return Err(SpectralError::Unresolved),
    };
    let n = scan.rates.len();
    let theta = unwrap_phases(&scan.theta);
    let covered = if n < 2 {
        0.0
    } else {
        let span = (theta[n - 1] - theta[0]).abs();
        span + span / (n - 1) as f64
    };
    if covered < TAU * (1.0 - 1e-9) {
        return Err(SpectralError::InsufficientCoverage { covered });
    }
    let half_linewidth = 0.5 * fwhm / TAU * free_spectral_range;
    let warnings = vec![ReadoutWarning::Aliased { free_spectral_range }];

    let rates = &scan.rates;
    let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || max - min <= 1e-9 * max {
        return Ok(SpectralReadout { peaks: Vec::new(), half_linewidth, warnings });
    }
    let threshold = min + PEAK_PROMINENCE * (max - min);

    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let y = rates[i];
        if y < threshold {
            continue;
        }
        let left = (i > 0).then(|| rates[i - 1]);
        let right = (i + 1 < n).then(|| rates[i + 1]);
        let is_peak = left.is_none_or(|l| y >= l) && right.is_none_or(|r| y > r);
        if !is_peak {
            continue;
        }
        let position = match (left, right) {
            (Some(l), Some(r)) => {
                let curvature = l - 2.0 * y + r;
                let delta = if curvature < 0.0 { 0.5 * (l - r) / curvature } else { 0.0 };
                let step = 0.5 * (theta[i + 1] - theta[i - 1]);
                theta[i] + delta.clamp(-1.0, 1.0) * step
            }
            _ => theta[i],
        };
        candidates.push((reduce_mod_2pi(position), y));
    }

    // repeated periods and scan edges give duplicates of the same resonance
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for (pos, y) in candidates {
        if kept.iter().all(|&(p, _)| circular_distance(p, pos) > fwhm) {
            kept.push((pos, y));
        }
    }

    let mut peaks: Vec<SpectralPeak> = kept
        .into_iter()
        .map(|(pos, weight)| {
            let fraction = (-pos / TAU).rem_euclid(1.0);
            let fraction = if fraction >= 1.0 - 1e-9 { 0.0 } else { fraction };
            SpectralPeak { frequency_offset: fraction * free_spectral_range, weight, theta: pos }
        })
        .collect();
    peaks.sort_by(|a, b| a.frequency_offset.total_cmp(&b.frequency_offset));
    Ok(SpectralReadout { peaks, half_linewidth, warnings })
}
