use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::outcome::Channel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Detector {
    /// Left arm, transmission port.
    L1,
    /// Left arm, reflection port.
    L2,
    /// Right arm, transmission port.
    R1,
    /// Right arm, reflection port.
    R2,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::L1, Detector::L2, Detector::R1, Detector::R2];

    pub fn is_left(self) -> bool {
        matches!(self, Detector::L1 | Detector::L2)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Detector::L1 => "L1",
            Detector::L2 => "L2",
            Detector::R1 => "R1",
            Detector::R2 => "R2",
        }
    }

    /// Detectors that fire for a channel, left first.
    pub fn pair_for(channel: Channel) -> (Detector, Detector) {
        match channel {
            Channel::TT => (Detector::L1, Detector::R1),
            Channel::RR => (Detector::L2, Detector::R2),
            Channel::RT => (Detector::L2, Detector::R1),
            Channel::TR => (Detector::L1, Detector::R2),
        }
    }

    /// Channel named by a left/right detector pair.
    pub fn channel_of(left: Detector, right: Detector) -> Option<Channel> {
        match (left, right) {
            (Detector::L1, Detector::R1) => Some(Channel::TT),
            (Detector::L2, Detector::R2) => Some(Channel::RR),
            (Detector::L2, Detector::R1) => Some(Channel::RT),
            (Detector::L1, Detector::R2) => Some(Channel::TR),
            _ => None,
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Detector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Detector::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim())
            .ok_or_else(|| format!("unknown detector `{s}`"))
    }
}

/// Per-detector quantum efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Efficiencies {
    pub l1: f64,
    pub l2: f64,
    pub r1: f64,
    pub r2: f64,
}

impl Efficiencies {
    pub const fn uniform(eta: f64) -> Self {
        Self { l1: eta, l2: eta, r1: eta, r2: eta }
    }

    pub fn get(&self, d: Detector) -> f64 {
        match d {
            Detector::L1 => self.l1,
            Detector::L2 => self.l2,
            Detector::R1 => self.r1,
            Detector::R2 => self.r2,
        }
    }
}

impl Default for Efficiencies {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

/// Detector imperfections. The default is ideal: unit efficiency, no jitter,
/// no dark counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorModel {
    pub efficiency: Efficiencies,
    /// Gaussian timing jitter, seconds.
    pub timing_jitter_sigma: f64,
    /// Dark counts per second, per detector.
    pub dark_count_rate: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self { efficiency: Efficiencies::default(), timing_jitter_sigma: 0.0, dark_count_rate: 0.0 }
    }
}

impl DetectorModel {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for d in Detector::ALL {
            let eta = self.efficiency.get(d);
            if !(0.0..=1.0).contains(&eta) {
                return Err(SimError::InvalidDetector(format!("efficiency of {d} = {eta} is outside [0, 1]")));
            }
        }
        if !(self.timing_jitter_sigma.is_finite() && self.timing_jitter_sigma >= 0.0) {
            return Err(SimError::InvalidDetector(format!(
                "timing_jitter_sigma = {} must be non-negative",
                self.timing_jitter_sigma
            )));
        }
        if !(self.dark_count_rate.is_finite() && self.dark_count_rate >= 0.0) {
            return Err(SimError::InvalidDetector(format!(
                "dark_count_rate = {} must be non-negative",
                self.dark_count_rate
            )));
        }
        Ok(())
    }

    /// `η_a·η_b` for the two detectors of a channel.
    pub fn pair_efficiency(&self, channel: Channel) -> f64 {
        let (a, b) = Detector::pair_for(channel);
        self.efficiency.get(a) * self.efficiency.get(b)
    }
}

/// One detector click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub detector: Detector,
    /// Seconds since the start of the run.
    pub timestamp: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_and_channels_agree() {
        for c in Channel::ALL {
            let (l, r) = Detector::pair_for(c);
            assert!(l.is_left() && !r.is_left());
            assert_eq!(Detector::channel_of(l, r), Some(c));
            assert_eq!(format!("{l}{r}"), c.detector_pair());
        }
        assert_eq!(Detector::channel_of(Detector::R1, Detector::L1), None);
    }

    #[test]
    fn validation() {
        assert!(DetectorModel::ideal().validate().is_ok());
        let mut m = DetectorModel::ideal();
        m.efficiency.r2 = 1.5;
        assert!(m.validate().is_err());
        let m = DetectorModel { timing_jitter_sigma: -1.0, ..DetectorModel::ideal() };
        assert!(m.validate().is_err());
        let m = DetectorModel { dark_count_rate: f64::NAN, ..DetectorModel::ideal() };
        assert!(m.validate().is_err());
    }
}
