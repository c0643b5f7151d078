//! Lossless mirror coefficients shared by both cavities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum allowed deviation from `T² + R² = 1`.
pub const UNITARITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MirrorError {
    #[error("field coefficient {name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("T² + R² = {sum} deviates from 1 by more than {UNITARITY_TOLERANCE:e}")]
    NotLossless { sum: f64 },
}

/// Field transmission `T` and field reflection `R` of a planar, lossless
/// mirror. Both cavities use identical mirrors, so this pair is the only
/// material parameter of the interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMirrors", into = "RawMirrors")]
pub struct MirrorCoefficients {
    t_field: f64,
    r_field: f64,
}

#[derive(Serialize, Deserialize)]
struct RawMirrors {
    t_field: f64,
    r_field: f64,
}

impl TryFrom<RawMirrors> for MirrorCoefficients {
    type Error = MirrorError;

    fn try_from(raw: RawMirrors) -> Result<Self, Self::Error> {
        Self::from_pair(raw.t_field, raw.r_field)
    }
}

impl From<MirrorCoefficients> for RawMirrors {
    fn from(m: MirrorCoefficients) -> Self {
        RawMirrors { t_field: m.t_field, r_field: m.r_field }
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<(), MirrorError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(MirrorError::OutOfRange { name, value })
    }
}

impl MirrorCoefficients {
    /// Builds the mirror from its field transmission; `R = sqrt(1 - T²)`.
    pub fn from_transmission(t_field: f64) -> Result<Self, MirrorError> {
        check_unit("T", t_field)?;
        let r_field = (1.0 - t_field * t_field).max(0.0).sqrt();
        Ok(Self { t_field, r_field })
    }

    /// Builds the mirror from its field reflection; `T = sqrt(1 - R²)`.
    pub fn from_reflection(r_field: f64) -> Result<Self, MirrorError> {
        check_unit("R", r_field)?;
        let t_field = (1.0 - r_field * r_field).max(0.0).sqrt();
        Ok(Self { t_field, r_field })
    }

    /// Accepts an explicit pair, rejecting it unless it is lossless.
    pub fn from_pair(t_field: f64, r_field: f64) -> Result<Self, MirrorError> {
        check_unit("T", t_field)?;
        check_unit("R", r_field)?;
        let sum = t_field * t_field + r_field * r_field;
        if (sum - 1.0).abs() > UNITARITY_TOLERANCE {
            return Err(MirrorError::NotLossless { sum });
        }
        Ok(Self { t_field, r_field })
    }

    #[inline]
    pub fn t(&self) -> f64 {
        self.t_field
    }

    #[inline]
    pub fn r(&self) -> f64 {
        self.r_field
    }

    /// Intensity transmission `T²`.
    #[inline]
    pub fn t2(&self) -> f64 {
        self.t_field * self.t_field
    }

    /// Intensity reflection `R²`.
    #[inline]
    pub fn r2(&self) -> f64 {
        self.r_field * self.r_field
    }

    /// `R⁴`: the two-photon round-trip attenuation, ratio of the joint
    /// geometric series.
    #[inline]
    pub fn r4(&self) -> f64 {
        let r2 = self.r2();
        r2 * r2
    }

    /// Perfect transmitter: the cavities are invisible.
    pub fn is_transparent(&self) -> bool {
        self.r_field == 0.0
    }

    /// Perfect reflector: nothing enters the cavities.
    pub fn is_opaque(&self) -> bool {
        self.t_field == 0.0
    }

    /// Coefficient finesse of the joint resonance, `π R² / (1 − R⁴)`.
    pub fn joint_finesse(&self) -> f64 {
        let r4 = self.r4();
        if r4 >= 1.0 {
            f64::INFINITY
        } else {
            std::f64::consts::PI * self.r2() / (1.0 - r4)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derives_reflection() {
        let m = MirrorCoefficients::from_transmission(0.5).unwrap();
        assert!((m.r2() - 0.75).abs() < 1e-15);
        assert!((m.t2() + m.r2() - 1.0).abs() < UNITARITY_TOLERANCE);
        let m = MirrorCoefficients::from_reflection(0.6).unwrap();
        assert!((m.t() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(MirrorCoefficients::from_transmission(-0.1).is_err());
        assert!(MirrorCoefficients::from_transmission(1.1).is_err());
        assert!(MirrorCoefficients::from_transmission(f64::NAN).is_err());
        assert!(matches!(
            MirrorCoefficients::from_pair(0.5, 0.5),
            Err(MirrorError::NotLossless { .. })
        ));
        assert!(MirrorCoefficients::from_pair(0.6, 0.8).is_ok());
    }

    #[test]
    fn edge_mirrors() {
        let open = MirrorCoefficients::from_transmission(1.0).unwrap();
        assert!(open.is_transparent());
        let closed = MirrorCoefficients::from_transmission(0.0).unwrap();
        assert!(closed.is_opaque());
        assert_eq!(closed.r(), 1.0);
        assert!(closed.joint_finesse().is_infinite());
    }

    #[test]
    fn serde_validates() {
        let bad: Result<MirrorCoefficients, _> =
            serde_json::from_str(r#"{"t_field":0.5,"r_field":0.5}"#);
        assert!(bad.is_err());
        let good: MirrorCoefficients =
            serde_json::from_str(r#"{"t_field":0.6,"r_field":0.8}"#).unwrap();
        assert_eq!(good.t(), 0.6);
    }
}
