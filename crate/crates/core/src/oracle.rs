//! Brute-force path enumeration, independent of the closed forms.
//!
//! Each photon leaves its cavity through the transmission port after `l`
//! round trips (`T² R^{2l}`) or through the reflection port, either promptly
//! (`−R`) or after `l ≥ 1` round trips (`T² R^{2l−1}`). For an entangled pair
//! the two exit paths `(l_L, l_R)` with the same click offset `m = l_R − l_L`
//! end in the same two-photon state and add coherently with relative phase
//! `e^{iθ·min(l_L, l_R)}`; no geometric series is summed in closed form here.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::biphoton::channel_amplitude;
use crate::mirrors::MirrorCoefficients;
use crate::outcome::{Channel, DetectionOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Port {
    Transmit,
    Reflect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathAmplitude {
    pub port: Port,
    pub round_trips: u64,
    pub amplitude: Complex64,
    /// Single-photon round-trip phase `2kd` folded into `amplitude`.
    pub phase_per_trip: f64,
}

/// Real path weight, no propagation phase.
fn path_weight(mirrors: &MirrorCoefficients, port: Port, l: u64) -> f64 {
    let t2 = mirrors.t2();
    let r = mirrors.r();
    match (port, l) {
        (Port::Transmit, l) => t2 * r.powi(2 * l as i32),
        (Port::Reflect, 0) => -r,
        (Port::Reflect, l) => t2 * r.powi(2 * l as i32 - 1),
    }
}

/// All `2·l_max + 2` exit paths of one photon, without propagation phase.
pub fn enumerate_single_photon_paths(mirrors: &MirrorCoefficients, l_max: u64) -> Vec<PathAmplitude> {
    enumerate_single_photon_paths_with_phase(mirrors, l_max, 0.0)
}

/// As [`enumerate_single_photon_paths`], with `e^{i l φ}` folded into each
/// amplitude for a single-photon round-trip phase `φ = 2kd`.
pub fn enumerate_single_photon_paths_with_phase(
    mirrors: &MirrorCoefficients,
    l_max: u64,
    phase_per_trip: f64,
) -> Vec<PathAmplitude> {
    [Port::Transmit, Port::Reflect]
        .into_iter()
        .flat_map(|port| {
            (0..=l_max).map(move |l| PathAmplitude {
                port,
                round_trips: l,
                amplitude: Complex64::cis(phase_per_trip * l as f64) * path_weight(mirrors, port, l),
                phase_per_trip,
            })
        })
        .collect()
}

/// Single-photon probability carried by paths beyond `l_max`:
/// `Σ_{l > l_max} T⁴(R^{4l} + R^{4l−2}) = T² R^{4 l_max + 2}`.
pub fn single_photon_tail(mirrors: &MirrorCoefficients, l_max: u64) -> f64 {
    mirrors.t2() * mirrors.r().powi(4 * l_max as i32 + 2)
}

fn ports(channel: Channel) -> (Port, Port) {
    match channel {
        Channel::TT => (Port::Transmit, Port::Transmit),
        Channel::RR => (Port::Reflect, Port::Reflect),
        Channel::RT => (Port::Reflect, Port::Transmit),
        Channel::TR => (Port::Transmit, Port::Reflect),
    }
}

/// Brute-force amplitude together with the sum of term magnitudes.
fn coherent_sum(
    mirrors: &MirrorCoefficients,
    theta: f64,
    outcome: DetectionOutcome,
    l_max: u64,
) -> (Complex64, f64) {
    let (left, right) = ports(outcome.channel);
    let m = outcome.offset_m;
    let shift = m.unsigned_abs();
    if shift > l_max {
        return (Complex64::new(0.0, 0.0), 0.0);
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    // smallest terms first
    for l in (0..=l_max - shift).rev() {
        let (l_left, l_right) = if m >= 0 { (l, l + shift) } else { (l + shift, l) };
        let weight = path_weight(mirrors, left, l_left) * path_weight(mirrors, right, l_right);
        sum += Complex64::cis(theta * l_left.min(l_right) as f64) * weight;
        magnitude += weight.abs();
    }
    (sum, magnitude)
}

/// Coherent sum over all path pairs `(l_L, l_R) ≤ l_max` belonging to
/// `outcome`.
pub fn biphoton_amplitude_bruteforce(
    mirrors: &MirrorCoefficients,
    theta: f64,
    outcome: DetectionOutcome,
    l_max: u64,
) -> Complex64 {
    coherent_sum(mirrors, theta, outcome, l_max).0
}

/// Upper bound on the modulus of the terms omitted by truncating at `l_max`.
///
/// Every exit amplitude satisfies `|a(l)| ≤ B R^{2l}` with
/// `B = max(T², R, T²/R)`, and the omitted pairs have `min(l_L, l_R) ≥
/// l_max − |m| + 1`, so the omitted sum is at most
/// `B² R^{2|m| + 4 l₀} / (1 − R⁴)`.
pub fn bruteforce_tail_bound(mirrors: &MirrorCoefficients, offset_m: i64, l_max: u64) -> f64 {
    let r = mirrors.r();
    if r == 0.0 {
        return 0.0;
    }
    if mirrors.is_opaque() {
        return f64::INFINITY;
    }
    let shift = offset_m.unsigned_abs();
    let l0 = (l_max + 1).saturating_sub(shift);
    let t2 = mirrors.t2();
    let b = t2.max(r).max(t2 / r);
    let exponent = 2.0 * shift as f64 + 4.0 * l0 as f64;
    b * b * r.powf(exponent) / (t2 * (1.0 + mirrors.r2()))
}

/// Smallest `l_max` whose tail bound is below `target` for every `|m| ≤ m_max`.
pub fn adaptive_l_max(mirrors: &MirrorCoefficients, m_max: u64, target: f64) -> Option<u64> {
    if mirrors.r() == 0.0 {
        return Some(m_max);
    }
    if mirrors.is_opaque() || !(target > 0.0) {
        return None;
    }
    // for fixed l_max the bound grows with |m|
    let mut l_max = m_max;
    while bruteforce_tail_bound(mirrors, 0, l_max) > target
        || bruteforce_tail_bound(mirrors, m_max as i64, l_max) > target
    {
        l_max += 1;
        if l_max > 100_000_000 {
            return None;
        }
    }
    Some(l_max)
}

/// Outcome-resolved rates of simultaneously emitted but unentangled pairs.
///
/// Each photon's exit path is independent, so rates are incoherent products
/// of single-photon probabilities and cannot depend on the cavity phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableBaseline {
    /// TT rate at `m = 0`: `Σ_l |a_T(l)|⁴ → T⁸/(1 − R⁸)`.
    pub coincidence_rate: f64,
    /// TT rate at each offset `|m| ≤ l_max`.
    pub per_offset_rates: BTreeMap<i64, f64>,
    /// Both photons transmitted at any offset: `(T⁴/(1 − R⁴))²` in the limit.
    pub both_transmitted_rate: f64,
}

pub fn separable_coincidence_baseline(mirrors: &MirrorCoefficients, l_max: u64) -> SeparableBaseline {
    let prob: Vec<f64> = (0..=l_max)
        .map(|l| path_weight(mirrors, Port::Transmit, l).powi(2))
        .collect();
    let mut per_offset_rates = BTreeMap::new();
    let l_max = l_max as i64;
    for m in -l_max..=l_max {
        let shift = m.unsigned_abs() as usize;
        let rate: f64 = (0..prob.len() - shift).rev().map(|l| prob[l] * prob[l + shift]).sum();
        per_offset_rates.insert(m, rate);
    }
    let single: f64 = prob.iter().rev().sum();
    SeparableBaseline {
        coincidence_rate: per_offset_rates[&0],
        per_offset_rates,
        both_transmitted_rate: single * single,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDeviation {
    pub outcome: DetectionOutcome,
    pub closed_form: Complex64,
    pub bruteforce: Complex64,
    pub deviation: f64,
    pub tail_bound: f64,
    /// Floating-point allowance for the truncated sum.
    pub rounding_bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub t_field: f64,
    pub theta: f64,
    pub l_max: u64,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub max_tail_bound: f64,
    pub entries: Vec<OutcomeDeviation>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &OutcomeDeviation> {
        self.entries.iter().filter(|e| !e.passed)
    }

    /// Human-readable reason for a failing comparison.
    pub fn explain(&self) -> Option<String> {
        if self.passed() {
            return None;
        }
        let n = self.failures().count();
        let mut msg = format!(
            "{n} outcome(s) deviate by more than {:e} (worst {:e}) at T={}, theta={}, l_max={}",
            self.tolerance, self.max_deviation, self.t_field, self.theta, self.l_max
        );
        if self.max_tail_bound > self.tolerance {
            msg.push_str(&format!(
                "; the truncation tail bound {:e} exceeds the tolerance, raise l_max",
                self.max_tail_bound
            ));
        }
        Some(msg)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle verification failed: {}", .0.explain().unwrap_or_default())]
    VerificationFailed(Box<OracleReport>),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

/// Checks the closed-form amplitudes against the path sums.
pub fn compare_with_closed_form(
    mirrors: &MirrorCoefficients,
    theta: f64,
    outcomes: &[DetectionOutcome],
    l_max: u64,
    tolerance: f64,
) -> Result<OracleReport, OracleError> {
    if !(tolerance > 0.0) {
        return Err(OracleError::InvalidTolerance(tolerance));
    }
    let entries: Vec<OutcomeDeviation> = outcomes
        .iter()
        .map(|&outcome| {
            let closed_form = channel_amplitude(mirrors, theta, outcome).value;
            let (bruteforce, magnitude) = coherent_sum(mirrors, theta, outcome, l_max);
            let deviation = (closed_form - bruteforce).norm();
            let tail_bound = bruteforce_tail_bound(mirrors, outcome.offset_m, l_max);
            let rounding_bound = 8.0 * (l_max as f64 + 2.0) * f64::EPSILON * magnitude.max(closed_form.norm());
            OutcomeDeviation {
                outcome,
                closed_form,
                bruteforce,
                deviation,
                tail_bound,
                rounding_bound,
                passed: deviation <= tolerance,
            }
        })
        .collect();
    let report = OracleReport {
        t_field: mirrors.t(),
        theta,
        l_max,
        tolerance,
        max_deviation: entries.iter().map(|e| e.deviation).fold(0.0, f64::max),
        max_tail_bound: entries.iter().map(|e| e.tail_bound).fold(0.0, f64::max),
        entries,
    };
    if report.passed() {
        Ok(report)
    } else {
        Err(OracleError::VerificationFailed(Box::new(report)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn mirror(t: f64) -> MirrorCoefficients {
        MirrorCoefficients::from_transmission(t).unwrap()
    }

    #[test]
    fn transparent_mirror_single_path() {
        let paths = enumerate_single_photon_paths(&mirror(1.0), 5);
        assert_eq!(paths.len(), 12);
        let nonzero: Vec<_> = paths.iter().filter(|p| p.amplitude.norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].port, Port::Transmit);
        assert_eq!(nonzero[0].round_trips, 0);
        assert_eq!(nonzero[0].amplitude, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn prompt_paths() {
        let m = mirror(0.5);
        let paths = enumerate_single_photon_paths(&m, 0);
        assert_eq!(paths.len(), 2);
        assert_relative_eq!(paths[0].amplitude.re, 0.25);
        assert_relative_eq!(paths[1].amplitude.re, -(0.75f64.sqrt()), max_relative = 1e-15);
        let kept: f64 = paths.iter().map(|p| p.amplitude.norm_sqr()).sum();
        assert_relative_eq!(kept + single_photon_tail(&m, 0), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn tail_formula_matches_direct_sum() {
        for t in [0.2, 0.5, 0.8] {
            let m = mirror(t);
            let all: f64 = enumerate_single_photon_paths(&m, 4000)
                .iter()
                .map(|p| p.amplitude.norm_sqr())
                .sum();
            for l_max in [0, 3, 17] {
                let kept: f64 = enumerate_single_photon_paths(&m, l_max)
                    .iter()
                    .map(|p| p.amplitude.norm_sqr())
                    .sum();
                assert_relative_eq!(all - kept, single_photon_tail(&m, l_max), max_relative = 1e-9, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn resonant_single_photon_reflection_vanishes() {
        let m = mirror(0.5);
        let l_max = 200;
        let reflected: Complex64 = enumerate_single_photon_paths_with_phase(&m, l_max, 2.0 * PI)
            .iter()
            .filter(|p| p.port == Port::Reflect)
            .map(|p| p.amplitude)
            .sum();
        assert!(reflected.norm() < 1e-10);
    }

    #[test]
    fn bruteforce_examples() {
        let m = mirror(0.5);
        let tt = biphoton_amplitude_bruteforce(&m, 0.0, DetectionOutcome::transmission_coincidence(), 60);
        assert!((tt - Complex64::new(1.0 / 7.0, 0.0)).norm() < 1e-12);
        let rr = biphoton_amplitude_bruteforce(&m, 0.0, DetectionOutcome::reflection_coincidence(), 60);
        assert!((rr - Complex64::new(6.0 / 7.0, 0.0)).norm() < 1e-12);
        let open = mirror(1.0);
        for o in DetectionOutcome::all_up_to(3) {
            let a = biphoton_amplitude_bruteforce(&open, 0.7, o, 10);
            if o == DetectionOutcome::transmission_coincidence() {
                assert_eq!(a, Complex64::new(1.0, 0.0));
            } else {
                assert_eq!(a.norm(), 0.0);
            }
        }
    }

    #[test]
    fn comparison_examples() {
        let outcomes = DetectionOutcome::all_up_to(5);
        let report = compare_with_closed_form(&mirror(0.5), 1.3, &outcomes, 80, 1e-10).unwrap();
        assert!(report.max_deviation < 1e-10);
        for e in &report.entries {
            assert!(e.deviation <= e.tail_bound + e.rounding_bound, "{e:?}");
        }

        let err = compare_with_closed_form(
            &mirror(0.1),
            PI / 3.0,
            &[DetectionOutcome::transmission_coincidence()],
            10,
            1e-12,
        )
        .unwrap_err();
        let OracleError::VerificationFailed(report) = err else { panic!() };
        assert!(report.max_tail_bound > 1e-12);
        assert!(report.explain().unwrap().contains("tail bound"));

        compare_with_closed_form(&mirror(1.0), 0.0, &outcomes, 0, 1e-15).unwrap();
    }

    #[test]
    fn separable_examples() {
        let b = separable_coincidence_baseline(&mirror(1.0), 10);
        assert_eq!(b.coincidence_rate, 1.0);
        assert!(b.per_offset_rates.iter().all(|(&m, &r)| m == 0 || r == 0.0));

        let m = mirror(0.5);
        let b = separable_coincidence_baseline(&m, 200);
        let t8 = m.t2().powi(4);
        assert_relative_eq!(b.coincidence_rate, t8 / (1.0 - m.r4() * m.r4()), max_relative = 1e-12);
        assert_relative_eq!(b.both_transmitted_rate, 1.0 / 49.0, max_relative = 1e-12);
        let total: f64 = b.per_offset_rates.values().sum();
        assert_relative_eq!(total, b.both_transmitted_rate, max_relative = 1e-12);

        let b = separable_coincidence_baseline(&mirror(0.2), 2000);
        assert_relative_eq!(b.both_transmitted_rate, 1.0 / (49.0 * 49.0), max_relative = 1e-10);
    }

    #[test]
    fn adaptive_l_max_meets_target() {
        let m = mirror(0.3);
        let l = adaptive_l_max(&m, 8, 1e-13).unwrap();
        assert!(bruteforce_tail_bound(&m, 0, l) <= 1e-13);
        assert!(bruteforce_tail_bound(&m, 8, l) <= 1e-13);
        assert!(bruteforce_tail_bound(&m, 8, l - 1) > 1e-13);
        assert_eq!(adaptive_l_max(&mirror(1.0), 4, 1e-13), Some(4));
        assert_eq!(adaptive_l_max(&mirror(0.0), 4, 1e-13), None);
    }
}
