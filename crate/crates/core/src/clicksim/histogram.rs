use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::{ClickEvent, Detector, DetectorModel, SimError};
use crate::biphoton::ChannelDistribution;
use crate::outcome::DetectionOutcome;

/// Two-sided tail probability of a 5σ Gaussian deviation.
pub const FIVE_SIGMA_P_VALUE: f64 = 5.733_031_437_583_878e-7;
pub const Z_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSettings {
    pub round_trip_time: f64,
    /// Half-width of the acceptance window around each `m·round_trip_time`.
    pub matching_window: f64,
    /// Largest `|m|` considered when pairing clicks.
    pub max_offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width: f64,
    pub bins: BTreeMap<DetectionOutcome, u64>,
    pub total_pairs_emitted: u64,
    pub unmatched_left: u64,
    pub unmatched_right: u64,
}

impl CoincidenceHistogram {
    pub fn count(&self, outcome: &DetectionOutcome) -> u64 {
        self.bins.get(outcome).copied().unwrap_or(0)
    }

    pub fn matched_pairs(&self) -> u64 {
        self.bins.values().sum()
    }
}

/// Pairs left-arm with right-arm clicks and bins them by detector pair and
/// round-trip offset.
///
/// Left clicks are visited in time order; each takes the unused right click
/// nearest in time among those within `matching_window` of some
/// `m·round_trip_time` with `|m| ≤ max_offset`. Every click is used at most
/// once.
pub fn build_histogram(
    stream: &[ClickEvent],
    settings: HistogramSettings,
    total_pairs_emitted: u64,
) -> Result<CoincidenceHistogram, SimError> {
    let HistogramSettings { round_trip_time: rt, matching_window: w, max_offset } = settings;
    if !(rt.is_finite() && rt > 0.0) {
        return Err(SimError::InvalidRoundTrip(rt));
    }
    if !(w > 0.0 && w < rt / 2.0) {
        return Err(SimError::InvalidWindow { window: w, limit: rt / 2.0 });
    }
    let mut left: Vec<&ClickEvent> = stream.iter().filter(|c| c.detector.is_left()).collect();
    let mut right: Vec<&ClickEvent> = stream.iter().filter(|c| !c.detector.is_left()).collect();
    left.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    right.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));

    let reach = max_offset as f64 * rt + w;
    let mut used = vec![false; right.len()];
    let mut bins = BTreeMap::new();
    let mut unmatched_left = 0;
    for l in &left {
        let start = right.partition_point(|r| r.timestamp < l.timestamp - reach);
        let mut best: Option<(usize, f64, i64)> = None;
        for (idx, r) in right.iter().enumerate().skip(start) {
            let delta = r.timestamp - l.timestamp;
            if delta > reach {
                break;
            }
            if used[idx] {
                continue;
            }
            let m = (delta / rt).round();
            if (delta - m * rt).abs() > w || m.abs() > max_offset as f64 {
                continue;
            }
            if best.is_none_or(|(_, d, _)| delta.abs() < d) {
                best = Some((idx, delta.abs(), m as i64));
            }
        }
        match best {
            Some((idx, _, m)) => {
                used[idx] = true;
                let channel = Detector::channel_of(l.detector, right[idx].detector)
                    .expect("left/right split guarantees a channel");
                *bins.entry(DetectionOutcome::new(channel, m)).or_insert(0) += 1;
            }
            None => unmatched_left += 1,
        }
    }
    let unmatched_right = used.iter().filter(|u| !**u).count() as u64;
    Ok(CoincidenceHistogram { bin_width: rt, bins, total_pairs_emitted, unmatched_left, unmatched_right })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub count: u64,
    /// Per-pair probability estimate (efficiency-corrected if requested).
    pub rate: f64,
    /// Binomial standard error `sqrt(p(1−p)/n)`, scaled like `rate`.
    pub std_error: f64,
    /// One-sided 95% upper bound for empty bins (rule of three, `3/n`).
    pub upper_bound_95: Option<f64>,
}

impl RateEstimate {
    pub fn from_count(count: u64, n_pairs: u64, efficiency: f64) -> Self {
        let n = n_pairs as f64;
        let p = count as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        let scale = if efficiency > 0.0 { 1.0 / efficiency } else { 1.0 };
        Self {
            count,
            rate: p * scale,
            std_error: se * scale,
            upper_bound_95: (count == 0).then(|| 3.0 / n * scale),
        }
    }
}

/// Per-outcome rate estimates. With `correction`, counts are divided by the
/// product of the two detectors' efficiencies.
pub fn estimate_rates(
    hist: &CoincidenceHistogram,
    n_pairs: u64,
    correction: Option<&DetectorModel>,
) -> BTreeMap<DetectionOutcome, RateEstimate> {
    let n_pairs = n_pairs.max(1);
    hist.bins
        .iter()
        .map(|(&o, &count)| {
            let eff = correction.map_or(1.0, |d| d.pair_efficiency(o.channel));
            (o, RateEstimate::from_count(count, n_pairs, eff))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckMethod {
    /// `|z| ≤ 5` with the analytic binomial σ.
    Normal,
    /// Normal test failed; accepted because the exact two-sided binomial
    /// p-value is at least the 5σ tail probability (few expected counts).
    ExactBinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCheck {
    pub outcome: DetectionOutcome,
    pub analytic: f64,
    pub estimate: f64,
    /// Analytic binomial σ of the estimate.
    pub std_error: f64,
    pub count: u64,
    pub z_score: f64,
    pub p_value: f64,
    pub method: CheckMethod,
    pub passed: bool,
}

fn binomial_p_value(count: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return if count == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if count == n { 1.0 } else { 0.0 };
    }
    let b = Binomial::new(p, n).expect("p in (0,1)");
    let lower = b.cdf(count);
    let upper = if count == 0 { 1.0 } else { b.sf(count - 1) };
    (2.0 * lower.min(upper)).min(1.0)
}

/// Compares observed counts against the closed-form distribution, outcome by
/// outcome, over every outcome that is either predicted or observed.
///
/// The expected count is `n·p·η_aη_b`. An outcome passes if its z-score is
/// within ±5, or, where the normal approximation breaks down, if the exact
/// binomial p-value is at least [`FIVE_SIGMA_P_VALUE`].
pub fn compare_with_analytic(
    analytic: &ChannelDistribution,
    hist: &CoincidenceHistogram,
    n_pairs: u64,
    detectors: Option<&DetectorModel>,
) -> Vec<ChannelCheck> {
    let n = n_pairs.max(1);
    let mut outcomes: Vec<DetectionOutcome> = analytic.probabilities.keys().copied().collect();
    outcomes.extend(hist.bins.keys().filter(|o| !analytic.probabilities.contains_key(o)));
    outcomes.sort();
    outcomes
        .into_iter()
        .map(|outcome| {
            let p = analytic.probability(&outcome);
            let eff = detectors.map_or(1.0, |d| d.pair_efficiency(outcome.channel));
            let q = p * eff;
            let count = hist.count(&outcome);
            let nf = n as f64;
            let sigma_count = (nf * q * (1.0 - q)).sqrt();
            let deviation = count as f64 - nf * q;
            let z_score = if sigma_count > 0.0 {
                deviation / sigma_count
            } else if deviation == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(deviation)
            };
            let p_value = binomial_p_value(count, n, q);
            let (method, passed) = if z_score.abs() <= Z_THRESHOLD {
                (CheckMethod::Normal, true)
            } else {
                (CheckMethod::ExactBinomial, p_value >= FIVE_SIGMA_P_VALUE)
            };
            let scale = if eff > 0.0 { 1.0 / (nf * eff) } else { 1.0 / nf };
            ChannelCheck {
                outcome,
                analytic: p,
                estimate: count as f64 * scale,
                std_error: sigma_count * scale,
                count,
                z_score,
                p_value,
                method,
                passed,
            }
        })
        .collect()
}

/// `(max − min)/(max + min)` of a rate scan covering at least one period.
pub fn fringe_visibility(rates_vs_theta: &[(f64, f64)]) -> Result<f64, SimError> {
    let n = rates_vs_theta.len();
    if n < 3 {
        return Err(SimError::InvalidScan(format!("got {n} point(s)")));
    }
    let lo = rates_vs_theta.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = rates_vs_theta.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let covered = (hi - lo) * n as f64 / (n - 1) as f64;
    if !(covered >= TAU * (1.0 - 1e-9)) {
        return Err(SimError::InvalidScan(format!("phase coverage {covered:.4} rad < 2π")));
    }
    let max = rates_vs_theta.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let min = rates_vs_theta.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if max + min <= 0.0 {
        return Err(SimError::DegenerateVisibility);
    }
    Ok((max - min) / (max + min))
}
