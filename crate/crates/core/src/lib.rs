//! Dual-channel Fabry-Pérot interferometry of energy-time entangled photon
//! pairs.
//!
//! * [`biphoton`]: closed-form joint-detection amplitudes for every
//!   post-selection channel, normalized to the no-cavity coincidence rate.
//! * [`oracle`]: brute-force exit-path enumeration that re-derives those
//!   amplitudes, plus an unentangled baseline.
//! * [`spectral`]: finite-bandwidth entanglement envelopes, cavity scans and
//!   a peak-based spectral readout.
//! * [`clicksim`]: Monte Carlo detector click streams and the coincidence
//!   analysis that turns them back into rates.

pub mod biphoton;
pub mod clicksim;
pub mod config;
pub mod mirrors;
pub mod oracle;
pub mod outcome;
pub mod phase;
pub mod spectral;

pub use biphoton::{
    channel_amplitude, channel_distribution, channel_rate, resonance_linewidth,
    transmission_coincidence_rate, ChannelDistribution, JointAmplitude, Linewidth,
};
pub use config::{on_resonance, InterferometerConfig};
pub use mirrors::MirrorCoefficients;
pub use outcome::{Channel, DetectionOutcome};
pub use phase::{phase_from_geometry, SPEED_OF_LIGHT};
