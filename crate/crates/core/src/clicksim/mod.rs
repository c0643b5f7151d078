//! Monte Carlo detector click streams and their coincidence analysis.
//!
//! The pipeline is `sample_pair_outcomes → emit_click_streams →
//! build_histogram → estimate_rates`. With ideal detectors it recovers the
//! closed-form channel probabilities up to binomial noise.

mod detector;
mod histogram;
pub mod io;
pub mod rng;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::biphoton::{channel_distribution, DistributionError};
use crate::mirrors::MirrorCoefficients;
use crate::outcome::DetectionOutcome;

pub use detector::{ClickEvent, Detector, DetectorModel, Efficiencies};
pub use histogram::{
    build_histogram, compare_with_analytic, estimate_rates, fringe_visibility, ChannelCheck,
    CheckMethod, CoincidenceHistogram, HistogramSettings, RateEstimate, FIVE_SIGMA_P_VALUE,
    Z_THRESHOLD,
};

/// Truncation tolerance of the sampled distribution.
pub const SAMPLING_TAIL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error("n_pairs must be at least 1")]
    NoPairs,
    #[error("invalid detector model: {0}")]
    InvalidDetector(String),
    #[error("round_trip_time = {0} must be positive and finite")]
    InvalidRoundTrip(f64),
    #[error(
        "pair_interval {pair_interval:e} s must exceed (max |m| + 2)·round_trip_time = {minimum:e} s \
         so that consecutive pairs do not overlap"
    )]
    PairIntervalTooSmall { pair_interval: f64, minimum: f64 },
    #[error("matching window {window:e} s must be positive and below round_trip_time/2 = {limit:e} s")]
    InvalidWindow { window: f64, limit: f64 },
    #[error("fringe visibility needs at least 3 points spanning one period: {0}")]
    InvalidScan(String),
    #[error("fringe visibility is undefined when every rate is zero")]
    DegenerateVisibility,
    #[error("click stream parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Draws `n_pairs` i.i.d. outcomes from the closed-form channel distribution,
/// truncated at [`SAMPLING_TAIL_TOLERANCE`] and renormalized.
pub fn sample_pair_outcomes(
    mirrors: &MirrorCoefficients,
    theta: f64,
    n_pairs: u64,
    seed: u64,
) -> Result<Vec<DetectionOutcome>, SimError> {
    if n_pairs == 0 {
        return Err(SimError::NoPairs);
    }
    let dist = channel_distribution(mirrors, theta, SAMPLING_TAIL_TOLERANCE)?;
    let outcomes: Vec<DetectionOutcome> = dist.probabilities.keys().copied().collect();
    let mut cumulative = Vec::with_capacity(outcomes.len());
    let mut acc = 0.0;
    for p in dist.probabilities.values() {
        acc += p;
        cumulative.push(acc);
    }
    let total = acc;
    let last = outcomes.len() - 1;
    Ok((0..n_pairs)
        .into_par_iter()
        .map(|j| {
            let u: f64 = rng::substream(seed, rng::DOMAIN_OUTCOME, j).random::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c <= u).min(last);
            outcomes[idx]
        })
        .collect())
}

/// Click timing layout of the emitted streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionSettings {
    /// Cavity round-trip time `2d/c`, seconds.
    pub round_trip_time: f64,
    /// Spacing between pair emissions, seconds.
    pub pair_interval: f64,
}

impl EmissionSettings {
    /// Spacing `(2·max_offset + 4)·round_trip_time`: a left click searching
    /// `±max_offset` round trips can then never reach a neighbouring pair.
    pub fn separated(round_trip_time: f64, max_offset: u64) -> Self {
        Self { round_trip_time, pair_interval: (2.0 * max_offset as f64 + 4.0) * round_trip_time }
    }
}

/// Turns outcomes into time-ordered detector clicks.
///
/// Pair `j` is emitted at `j·pair_interval`. The lagging click trails the
/// leading one by `|m|·round_trip_time`; for `m > 0` the left click leads.
/// Each click survives with its detector's efficiency and is displaced by
/// Gaussian jitter; dark counts are added as a Poisson process per detector
/// over the whole run.
pub fn emit_click_streams(
    outcomes: &[DetectionOutcome],
    settings: EmissionSettings,
    detectors: &DetectorModel,
    seed: u64,
) -> Result<Vec<ClickEvent>, SimError> {
    detectors.validate()?;
    let EmissionSettings { round_trip_time, pair_interval } = settings;
    if !(round_trip_time.is_finite() && round_trip_time > 0.0) {
        return Err(SimError::InvalidRoundTrip(round_trip_time));
    }
    let max_offset = outcomes.iter().map(|o| o.offset_m.unsigned_abs()).max().unwrap_or(0);
    let minimum = (max_offset as f64 + 2.0) * round_trip_time;
    if !(pair_interval > minimum) {
        return Err(SimError::PairIntervalTooSmall { pair_interval, minimum });
    }
    let jitter = (detectors.timing_jitter_sigma > 0.0)
        .then(|| Normal::new(0.0, detectors.timing_jitter_sigma).expect("validated sigma"));

    let mut clicks: Vec<ClickEvent> = outcomes
        .par_iter()
        .enumerate()
        .flat_map_iter(|(j, outcome)| {
            let mut rng = rng::substream(seed, rng::DOMAIN_EMISSION, j as u64);
            let t0 = j as f64 * pair_interval;
            let m = outcome.offset_m as f64;
            let (left, right) = Detector::pair_for(outcome.channel);
            let left_time = t0 + (-m).max(0.0) * round_trip_time;
            let right_time = t0 + m.max(0.0) * round_trip_time;
            let mut emitted = Vec::with_capacity(2);
            for (detector, time) in [(left, left_time), (right, right_time)] {
                let keep = rng.random::<f64>() < detectors.efficiency.get(detector);
                let shift = jitter.map_or(0.0, |n| n.sample(&mut rng));
                if keep {
                    emitted.push(ClickEvent { detector, timestamp: (time + shift).max(0.0) });
                }
            }
            emitted
        })
        .collect();

    if detectors.dark_count_rate > 0.0 {
        let span = outcomes.len() as f64 * pair_interval;
        let mean = detectors.dark_count_rate * span;
        for detector in Detector::ALL {
            let mut rng = rng::substream(seed, rng::DOMAIN_DARK, detector.index() as u64);
            let count = Poisson::new(mean).map(|p| p.sample(&mut rng) as u64).unwrap_or(0);
            clicks.extend((0..count).map(|_| ClickEvent { detector, timestamp: rng.random::<f64>() * span }));
        }
    }

    clicks.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then(a.detector.cmp(&b.detector)));
    Ok(clicks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::Channel;

    fn mirror(t: f64) -> MirrorCoefficients {
        MirrorCoefficients::from_transmission(t).unwrap()
    }

    const IDEAL_LAYOUT: EmissionSettings = EmissionSettings { round_trip_time: 1e-9, pair_interval: 1e-7 };

    #[test]
    fn transparent_cavities_always_coincide() {
        let outcomes = sample_pair_outcomes(&mirror(1.0), 0.0, 1000, 42).unwrap();
        assert!(outcomes.iter().all(|o| *o == DetectionOutcome::transmission_coincidence()));
    }

    #[test]
    fn sampling_is_deterministic_and_seeded() {
        let a = sample_pair_outcomes(&mirror(0.5), 0.3, 2000, 1).unwrap();
        let b = sample_pair_outcomes(&mirror(0.5), 0.3, 2000, 1).unwrap();
        let c = sample_pair_outcomes(&mirror(0.5), 0.3, 2000, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(matches!(sample_pair_outcomes(&mirror(0.5), 0.3, 0, 1), Err(SimError::NoPairs)));
    }

    #[test]
    fn ideal_tt_pairs_are_simultaneous() {
        let outcomes = vec![DetectionOutcome::transmission_coincidence(); 50];
        let clicks = emit_click_streams(&outcomes, IDEAL_LAYOUT, &DetectorModel::ideal(), 3).unwrap();
        assert_eq!(clicks.len(), 100);
        for pair in clicks.chunks(2) {
            assert_eq!(pair[0].timestamp, pair[1].timestamp);
            assert_eq!((pair[0].detector, pair[1].detector), (Detector::L1, Detector::R1));
        }
    }

    #[test]
    fn zero_efficiency_is_silent() {
        let outcomes = vec![DetectionOutcome::transmission_coincidence(); 50];
        let blind = DetectorModel { efficiency: Efficiencies::uniform(0.0), ..DetectorModel::ideal() };
        assert!(emit_click_streams(&outcomes, IDEAL_LAYOUT, &blind, 3).unwrap().is_empty());
        let dark = DetectorModel { dark_count_rate: 1e8, ..blind };
        let clicks = emit_click_streams(&outcomes, IDEAL_LAYOUT, &dark, 3).unwrap();
        assert!(!clicks.is_empty());
        assert!(clicks.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn positive_offset_left_leads() {
        let outcomes = [DetectionOutcome::new(Channel::TT, 2)];
        let clicks = emit_click_streams(&outcomes, IDEAL_LAYOUT, &DetectorModel::ideal(), 0).unwrap();
        assert_eq!(clicks[0].detector, Detector::L1);
        assert_eq!(clicks[1].detector, Detector::R1);
        assert_eq!(clicks[1].timestamp - clicks[0].timestamp, 2e-9);

        let outcomes = [DetectionOutcome::new(Channel::RT, -3)];
        let clicks = emit_click_streams(&outcomes, IDEAL_LAYOUT, &DetectorModel::ideal(), 0).unwrap();
        assert_eq!(clicks[0].detector, Detector::R1);
        assert_eq!(clicks[1].detector, Detector::L2);
    }

    #[test]
    fn rejects_overlapping_pairs() {
        let outcomes = [DetectionOutcome::new(Channel::TT, 200)];
        let err = emit_click_streams(&outcomes, IDEAL_LAYOUT, &DetectorModel::ideal(), 0).unwrap_err();
        assert!(matches!(err, SimError::PairIntervalTooSmall { .. }));
    }
}
