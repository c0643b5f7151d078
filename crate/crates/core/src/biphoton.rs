//! Closed-form joint-detection amplitudes of the dual-channel interferometer.
//!
//! Every amplitude is a function of the mirror pair and the joint round-trip
//! phase `θ = 2k_L d_L + 2k_R d_R` only. Two pure phases are dropped from the
//! stored values because they never affect a rate:
//!
//! * the plane-wave carrier `e^{i(k_L x − ω_L t)} e^{i(k_R x − ω_R t)}`;
//! * the offset phase `e^{−iω_L Δt}` of the non-coincident channels.
//!
//! Amplitudes are normalized so that the coincidence amplitude without the
//! cavities is 1, so `|amplitude|²` is the rate relative to the no-cavity
//! coincidence rate.
//!
//! Sign conventions: transmission through a mirror contributes `T`, an
//! internal reflection `+R`, and the prompt external reflection `−R`.
//!
//! Channel formulas, with `D = 1 − R⁴e^{iθ}`:
//!
//! | channel | offset | amplitude |
//! |---|---|---|
//! | TT | any m | `T⁴ R^{2|m|} / D` |
//! | RR | m = 0 | `R² (1 − (R² − T²) e^{iθ}) / D` |
//! | RR | m ≠ 0 | `T² R^{2|m|} (−1 + R² e^{iθ}) / D` |
//! | RT | m ≥ 0 | `T² R^{2m+1} (−1 + R² e^{iθ}) / D` |
//! | RT | m < 0 | `T⁴ R^{2|m|−1} / D` |
//! | TR | m | same as RT at −m (arms swapped) |

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mirrors::MirrorCoefficients;
use crate::outcome::{Channel, DetectionOutcome};
use crate::phase::distance_to_resonance;

/// Hard cap on the offset range of [`channel_distribution`].
pub const MAX_OFFSET_CAP: u64 = 1_000_000;

/// How a [`JointAmplitude`] value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Evaluation {
    ClosedForm,
    /// `T = 0` on resonance, where the closed form is 0/0.
    AnalyticLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointAmplitude {
    pub value: Complex64,
    pub outcome: DetectionOutcome,
    pub evaluation: Evaluation,
}

impl JointAmplitude {
    /// Normalized rate `|value|²`.
    pub fn rate(&self) -> f64 {
        self.value.norm_sqr()
    }
}

/// `1 − R⁴e^{iθ}` with the real part written as
/// `T²(1 + R²) + 2R⁴ sin²(θ/2)` to avoid cancellation near resonance.
fn resonance_denominator(mirrors: &MirrorCoefficients, theta: f64) -> Complex64 {
    let r4 = mirrors.r4();
    let half = (0.5 * theta).sin();
    let re = mirrors.t2() * (1.0 + mirrors.r2()) + 2.0 * r4 * half * half;
    Complex64::new(re, -r4 * theta.sin())
}

/// Normalized transmission coincidence rate `T⁸ / (1 + R⁸ − 2R⁴ cos θ)`.
pub fn transmission_coincidence_rate(mirrors: &MirrorCoefficients, theta: f64) -> f64 {
    let t2 = mirrors.t2();
    if t2 == 0.0 {
        return 0.0;
    }
    let r4 = mirrors.r4();
    let one_minus_r4 = t2 * (1.0 + mirrors.r2());
    let half = (0.5 * theta).sin();
    let t8 = (t2 * t2) * (t2 * t2);
    t8 / (one_minus_r4 * one_minus_r4 + 4.0 * r4 * half * half)
}

/// Amplitude of one post-selection channel. Total on valid mirrors.
pub fn channel_amplitude(
    mirrors: &MirrorCoefficients,
    theta: f64,
    outcome: DetectionOutcome,
) -> JointAmplitude {
    let m = outcome.offset_m;
    let reflection_coincidence = outcome == DetectionOutcome::reflection_coincidence();

    if mirrors.is_opaque() {
        let value = if reflection_coincidence { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        let evaluation = if distance_to_resonance(theta) <= f64::EPSILON {
            Evaluation::AnalyticLimit
        } else {
            Evaluation::ClosedForm
        };
        return JointAmplitude { value, outcome, evaluation };
    }

    let t = mirrors.t();
    let r = mirrors.r();
    let t2 = mirrors.t2();
    let r2 = mirrors.r2();
    let phase = Complex64::cis(theta);
    let denom = resonance_denominator(mirrors, theta);
    let abs_m = m.unsigned_abs();
    let rpow = |e: u64| r.powi(e as i32);
    // −1 + R² e^{iθ}
    let lossy_return = Complex64::new(-1.0, 0.0) + phase * r2;

    let numerator = match outcome.channel {
        Channel::TT => Complex64::new(t2 * t2 * rpow(2 * abs_m), 0.0),
        Channel::RR if m == 0 => (Complex64::new(1.0, 0.0) - phase * (r2 - t2)) * r2,
        Channel::RR => lossy_return * (t2 * rpow(2 * abs_m)),
        Channel::RT | Channel::TR => {
            // TR at m is RT at −m: the reflecting arm is the one named first.
            let leading = if outcome.channel == Channel::RT { m } else { -m };
            if leading >= 0 {
                lossy_return * (t2 * rpow(2 * abs_m + 1))
            } else {
                Complex64::new(t2 * t2 * rpow(2 * abs_m - 1), 0.0)
            }
        }
    };
    debug_assert!(t > 0.0);
    JointAmplitude {
        value: numerator / denom,
        outcome,
        evaluation: Evaluation::ClosedForm,
    }
}

/// Normalized rate of a single channel, `|channel_amplitude|²`.
pub fn channel_rate(mirrors: &MirrorCoefficients, theta: f64, outcome: DetectionOutcome) -> f64 {
    channel_amplitude(mirrors, theta, outcome).rate()
}

/// Full width at half maximum of the coincidence resonance in `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Linewidth {
    Resolved { fwhm: f64 },
    /// The rate never drops to half its peak: broad-resonance regime.
    Unresolved,
}

impl Linewidth {
    pub fn fwhm(&self) -> Option<f64> {
        match *self {
            Linewidth::Resolved { fwhm } => Some(fwhm),
            Linewidth::Unresolved => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinewidthError {
    #[error("resonance linewidth is undefined for an opaque mirror (T = 0)")]
    OpaqueMirror,
}

/// FWHM of the transmission coincidence resonance:
/// `4 arcsin((1 − R⁴)/(2R²))` when the argument is at most 1.
pub fn resonance_linewidth(mirrors: &MirrorCoefficients) -> Result<Linewidth, LinewidthError> {
    if mirrors.is_opaque() {
        return Err(LinewidthError::OpaqueMirror);
    }
    let r2 = mirrors.r2();
    if r2 == 0.0 {
        return Ok(Linewidth::Unresolved);
    }
    let arg = mirrors.t2() * (1.0 + r2) / (2.0 * r2);
    if arg > 1.0 {
        Ok(Linewidth::Unresolved)
    } else {
        Ok(Linewidth::Resolved { fwhm: 4.0 * arg.asin() })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("tail tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("tail tolerance {tolerance:e} needs |m| up to {needed}, above the cap {cap}")]
    OffsetCapExceeded { tolerance: f64, needed: f64, cap: u64 },
}

/// Probabilities of every outcome with `|m| ≤ m_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDistribution {
    pub probabilities: BTreeMap<DetectionOutcome, f64>,
    pub m_max: u64,
    /// Exact probability mass of the discarded outcomes `|m| > m_max`.
    pub tail_bound: f64,
}

impl ChannelDistribution {
    pub fn probability(&self, outcome: &DetectionOutcome) -> f64 {
        self.probabilities.get(outcome).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        // ascending summation keeps the small tail terms
        let mut values: Vec<f64> = self.probabilities.values().copied().collect();
        values.sort_by(f64::total_cmp);
        values.iter().sum()
    }

    /// Total probability of one channel over all retained offsets.
    pub fn channel_total(&self, channel: Channel) -> f64 {
        self.probabilities
            .iter()
            .filter(|(o, _)| o.channel == channel)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Sum over channels of the rates at offsets `±(m + 1)`.
fn boundary_mass(mirrors: &MirrorCoefficients, theta: f64, m: u64) -> f64 {
    let m = m as i64 + 1;
    Channel::ALL
        .into_iter()
        .map(|c| {
            channel_rate(mirrors, theta, DetectionOutcome::new(c, m))
                + channel_rate(mirrors, theta, DetectionOutcome::new(c, -m))
        })
        .sum()
}

/// Probability map over all post-selection outcomes.
///
/// Beyond `|m| = 1` every channel decays geometrically with ratio `R⁴`, so the
/// mass discarded above `m_max` is exactly `boundary(m_max) / (1 − R⁴)`;
/// `m_max` is the smallest value whose tail is below `tail_tolerance`.
pub fn channel_distribution(
    mirrors: &MirrorCoefficients,
    theta: f64,
    tail_tolerance: f64,
) -> Result<ChannelDistribution, DistributionError> {
    if !(tail_tolerance.is_finite() && tail_tolerance > 0.0) {
        return Err(DistributionError::InvalidTolerance(tail_tolerance));
    }
    let single = |outcome: DetectionOutcome| ChannelDistribution {
        probabilities: BTreeMap::from([(outcome, 1.0)]),
        m_max: 0,
        tail_bound: 0.0,
    };
    if mirrors.is_transparent() {
        return Ok(single(DetectionOutcome::transmission_coincidence()));
    }
    if mirrors.is_opaque() {
        return Ok(single(DetectionOutcome::reflection_coincidence()));
    }

    let r4 = mirrors.r4();
    let one_minus_r4 = mirrors.t2() * (1.0 + mirrors.r2());
    let tail_at = |m: u64| boundary_mass(mirrors, theta, m) / one_minus_r4;

    let g0 = boundary_mass(mirrors, theta, 0);
    let m_max = if g0 / one_minus_r4 <= tail_tolerance {
        0.0
    } else {
        ((tail_tolerance * one_minus_r4 / g0).ln() / r4.ln()).ceil().max(0.0)
    };
    if m_max > MAX_OFFSET_CAP as f64 {
        return Err(DistributionError::OffsetCapExceeded {
            tolerance: tail_tolerance,
            needed: m_max,
            cap: MAX_OFFSET_CAP,
        });
    }
    let mut m_max = m_max as u64;
    // rounding in the logarithm can leave m_max one step off either way
    while m_max > 0 && tail_at(m_max - 1) <= tail_tolerance {
        m_max -= 1;
    }
    while tail_at(m_max) > tail_tolerance {
        m_max += 1;
        if m_max > MAX_OFFSET_CAP {
            return Err(DistributionError::OffsetCapExceeded {
                tolerance: tail_tolerance,
                needed: m_max as f64,
                cap: MAX_OFFSET_CAP,
            });
        }
    }

    let probabilities = DetectionOutcome::all_up_to(m_max)
        .into_iter()
        .map(|o| (o, channel_rate(mirrors, theta, o)))
        .collect();
    Ok(ChannelDistribution { probabilities, m_max, tail_bound: tail_at(m_max) })
}
