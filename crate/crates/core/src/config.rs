//! Interferometer geometry and its derived round-trip phase.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mirrors::MirrorCoefficients;
use crate::phase::{distance_to_resonance, phase_from_geometry, PhaseError, SPEED_OF_LIGHT};

/// `finesse · |d_L − d_R|` must stay below this fraction of the pulse length
/// for the two cavities to count as equal.
pub const GEOMETRY_SMALLNESS: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error("pulse_length = {0} must be positive and finite")]
    InvalidPulseLength(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerConfig {
    pub mirrors: MirrorCoefficients,
    /// Cavity lengths, metres.
    pub d_left: f64,
    pub d_right: f64,
    /// Photon angular frequencies, rad/s.
    pub omega_left: f64,
    pub omega_right: f64,
    /// Single-photon pulse length `c × coherence time`, metres.
    pub pulse_length: f64,
    /// `2k_L d_L + 2k_R d_R` reduced into `[0, 2π)`.
    pub theta: f64,
}

impl InterferometerConfig {
    pub fn new(
        mirrors: MirrorCoefficients,
        d_left: f64,
        d_right: f64,
        omega_left: f64,
        omega_right: f64,
        pulse_length: f64,
    ) -> Result<Self, ConfigError> {
        if !(pulse_length.is_finite() && pulse_length > 0.0) {
            return Err(ConfigError::InvalidPulseLength(pulse_length));
        }
        let theta = phase_from_geometry(omega_left, omega_right, d_left, d_right)?;
        Ok(Self { mirrors, d_left, d_right, omega_left, omega_right, pulse_length, theta })
    }

    /// Equal-arm check: `finesse · |d_L − d_R|` small against the pulse length.
    pub fn geometry_valid(&self) -> bool {
        let mismatch = (self.d_left - self.d_right).abs();
        if mismatch == 0.0 {
            return true;
        }
        self.mirrors.joint_finesse() * mismatch <= GEOMETRY_SMALLNESS * self.pulse_length
    }

    /// A single pulse must be shorter than the cavity round trip so that it
    /// never overlaps with itself.
    pub fn self_interference_free(&self) -> bool {
        self.pulse_length < 2.0 * self.d_left.min(self.d_right)
    }

    /// Round-trip time `2d/c` of the left cavity, seconds.
    pub fn round_trip_time(&self) -> f64 {
        2.0 * self.d_left / SPEED_OF_LIGHT
    }

    /// Re-derives `theta` from the raw geometry.
    pub fn recompute_theta(&self) -> Result<f64, PhaseError> {
        phase_from_geometry(self.omega_left, self.omega_right, self.d_left, self.d_right)
    }
}

/// True when `k_L d_L + k_R d_R` lies within `tolerance` of a multiple of π.
pub fn on_resonance(config: &InterferometerConfig, tolerance: f64) -> bool {
    theta_on_resonance(config.theta, tolerance)
}

/// Same test on a bare phase: `θ` within `2·tolerance` of a multiple of 2π.
pub fn theta_on_resonance(theta: f64, tolerance: f64) -> bool {
    distance_to_resonance(theta) < 2.0 * tolerance
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg(d_left: f64, d_right: f64, pulse: f64) -> InterferometerConfig {
        let m = MirrorCoefficients::from_transmission(0.5).unwrap();
        InterferometerConfig::new(m, d_left, d_right, 2.4e15, 2.4e15, pulse).unwrap()
    }

    #[test]
    fn theta_rederivable() {
        let c = cfg(0.01, 0.0100001, 1e-3);
        assert!((c.recompute_theta().unwrap() - c.theta).abs() < 1e-9);
        assert!((0.0..2.0 * PI).contains(&c.theta));
    }

    #[test]
    fn resonance_tests() {
        assert!(theta_on_resonance(0.0, 1e-6));
        assert!(!theta_on_resonance(PI, 1e-6));
        assert!(theta_on_resonance(2.0 * PI - 1e-9, 1e-6));
    }

    #[test]
    fn geometry_flags() {
        assert!(cfg(0.01, 0.01, 1e-3).geometry_valid());
        // finesse(T=0.5) ≈ 5.39; 5.39 · 1e-4 m far exceeds 0.1 · 1e-4 m
        assert!(!cfg(0.01, 0.0101, 1e-4).geometry_valid());
        assert!(cfg(0.01, 0.0100001, 1e-3).geometry_valid());
        assert!(cfg(0.01, 0.01, 1e-3).self_interference_free());
        assert!(!cfg(0.01, 0.01, 0.05).self_interference_free());
    }

    #[test]
    fn rejects_bad_values() {
        let m = MirrorCoefficients::from_transmission(0.5).unwrap();
        assert!(InterferometerConfig::new(m, 0.01, 0.01, 1e15, 1e15, 0.0).is_err());
        assert!(matches!(
            InterferometerConfig::new(m, -0.01, 0.01, 1e15, 1e15, 1e-3),
            Err(ConfigError::Phase(PhaseError::InvalidInput { .. }))
        ));
    }
}
