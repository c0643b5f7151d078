//! Post-selection channels: which detector pair fired and at what offset.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Detector pair of a joint detection.
///
/// The first letter is the left arm port, the second the right arm port:
/// `T` = transmission detector (L1/R1), `R` = reflection detector (L2/R2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    /// L1 & R1
    TT,
    /// L2 & R2
    RR,
    /// L2 & R1
    RT,
    /// L1 & R2
    TR,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::TT, Channel::RR, Channel::RT, Channel::TR];

    /// Detector name pair, left first (e.g. `L2R1`).
    pub fn detector_pair(self) -> &'static str {
        match self {
            Channel::TT => "L1R1",
            Channel::RR => "L2R2",
            Channel::RT => "L2R1",
            Channel::TR => "L1R2",
        }
    }

    pub fn from_detector_pair(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.detector_pair() == s)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Channel::TT => "TT",
            Channel::RR => "RR",
            Channel::RT => "RT",
            Channel::TR => "TR",
        };
        f.write_str(s)
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TT" | "L1R1" => Ok(Channel::TT),
            "RR" | "L2R2" => Ok(Channel::RR),
            "RT" | "L2R1" => Ok(Channel::RT),
            "TR" | "L1R2" => Ok(Channel::TR),
            other => Err(format!("unknown channel `{other}` (expected TT, RR, RT or TR)")),
        }
    }
}

/// A detector pair plus the click-time separation in round trips.
///
/// `offset_m > 0` means the left-arm click leads the right-arm click by
/// `offset_m · 2d/c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub channel: Channel,
    pub offset_m: i64,
}

impl DetectionOutcome {
    pub const fn new(channel: Channel, offset_m: i64) -> Self {
        Self { channel, offset_m }
    }

    /// Both photons transmitted and clicking simultaneously.
    pub const fn transmission_coincidence() -> Self {
        Self::new(Channel::TT, 0)
    }

    /// Both photons reflected and clicking simultaneously.
    pub const fn reflection_coincidence() -> Self {
        Self::new(Channel::RR, 0)
    }

    /// Every outcome with `|m| ≤ m_max`, channel-major.
    pub fn all_up_to(m_max: u64) -> Vec<Self> {
        let m_max = m_max as i64;
        Channel::ALL
            .into_iter()
            .flat_map(|c| (-m_max..=m_max).map(move |m| Self::new(c, m)))
            .collect()
    }
}

impl fmt::Display for DetectionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} m={}", self.channel, self.offset_m)
    }
}
