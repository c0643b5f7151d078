//! Subcommands whose exit status is a verdict: the oracle comparison and the
//! Monte Carlo closure test.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{ensure, Context};
use fp_biphoton::clicksim::{
    build_histogram, compare_with_analytic, emit_click_streams, io, sample_pair_outcomes, CheckMethod,
    EmissionSettings, HistogramSettings, SAMPLING_TAIL_TOLERANCE,
};
use fp_biphoton::oracle::{adaptive_l_max, compare_with_closed_form, OracleError, OracleReport};
use fp_biphoton::{channel_distribution, DetectionOutcome};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{OracleCheck, Simulate, MIN_AUTO_L_MAX};
use crate::output::{Cell, Meta, Table};
use crate::scan::mirrors;

/// Distribution used as the reference in the closure test.
const REFERENCE_TAIL: f64 = 1e-12;

#[derive(Debug, Serialize)]
pub struct OracleCase {
    pub t: f64,
    pub theta: f64,
    pub l_max: u64,
    pub passed: bool,
    pub max_deviation: f64,
    pub max_tail_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct OutcomeSummary {
    pub pair: &'static str,
    pub m: i64,
    pub max_deviation: f64,
    pub max_tail_bound: f64,
    pub failures: usize,
}

#[derive(Debug, Serialize)]
pub struct OracleCheckReport {
    pub meta: Meta,
    pub passed: bool,
    /// `None` when chosen per `T` (see each case).
    pub l_max: Option<u64>,
    pub tolerance: f64,
    pub m_max: u64,
    pub cases: Vec<OracleCase>,
    pub outcomes: Vec<OutcomeSummary>,
}

impl OracleCheckReport {
    pub fn failing_outcomes(&self) -> Vec<String> {
        self.outcomes.iter().filter(|o| o.failures > 0).map(|o| format!("{} m={}", o.pair, o.m)).collect()
    }

    pub fn table(&self) -> Table {
        let rows = self
            .outcomes
            .iter()
            .map(|o| {
                vec![
                    Cell::Text(o.pair.to_owned()),
                    Cell::Int(o.m),
                    Cell::Num(o.max_deviation),
                    Cell::Num(o.max_tail_bound),
                    Cell::Int(o.failures as i64),
                ]
            })
            .collect();
        Table { columns: vec!["pair", "m", "max_deviation", "max_tail_bound", "failures"], rows }
    }
}

pub fn oracle_check(cfg: &OracleCheck, meta: Meta) -> anyhow::Result<OracleCheckReport> {
    ensure!(!cfg.t_values.is_empty(), "oracle_check.t_values is empty");
    ensure!(cfg.tolerance.is_finite() && cfg.tolerance > 0.0, "oracle_check.tolerance = {} must be positive", cfg.tolerance);
    let all_mirrors = cfg.t_values.iter().map(|&t| mirrors("oracle_check", t)).collect::<anyhow::Result<Vec<_>>>()?;
    let thetas = match &cfg.theta_values {
        Some(v) => {
            ensure!(!v.is_empty() && v.iter().all(|x| x.is_finite()), "oracle_check.theta_values must be finite and non-empty");
            v.clone()
        }
        None => {
            ensure!(cfg.theta_count >= 1, "oracle_check.theta_count must be at least 1");
            (0..cfg.theta_count).map(|i| i as f64 * TAU / cfg.theta_count as f64).collect()
        }
    };
    let outcomes = DetectionOutcome::all_up_to(cfg.m_max);
    let l_max: Vec<u64> = all_mirrors
        .iter()
        .map(|m| {
            cfg.l_max.unwrap_or_else(|| {
                adaptive_l_max(m, cfg.m_max, 0.1 * cfg.tolerance).map_or(MIN_AUTO_L_MAX, |l| l.max(MIN_AUTO_L_MAX))
            })
        })
        .collect();
    let grid: Vec<(usize, f64)> =
        (0..all_mirrors.len()).flat_map(|i| thetas.iter().map(move |&th| (i, th))).collect();
    let reports: Vec<OracleReport> = grid
        .par_iter()
        .map(|&(i, theta)| {
            match compare_with_closed_form(&all_mirrors[i], theta, &outcomes, l_max[i], cfg.tolerance) {
                Ok(r) => Ok(r),
                Err(OracleError::VerificationFailed(r)) => Ok(*r),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()
        .context("oracle_check")?;

    let mut per_outcome: BTreeMap<DetectionOutcome, OutcomeSummary> = BTreeMap::new();
    for report in &reports {
        for e in &report.entries {
            let s = per_outcome.entry(e.outcome).or_insert(OutcomeSummary {
                pair: e.outcome.channel.detector_pair(),
                m: e.outcome.offset_m,
                max_deviation: 0.0,
                max_tail_bound: 0.0,
                failures: 0,
            });
            s.max_deviation = s.max_deviation.max(e.deviation);
            s.max_tail_bound = s.max_tail_bound.max(e.tail_bound);
            s.failures += usize::from(!e.passed);
        }
    }
    let cases: Vec<OracleCase> = reports
        .iter()
        .map(|r| OracleCase {
            t: r.t_field,
            theta: r.theta,
            l_max: r.l_max,
            passed: r.passed(),
            max_deviation: r.max_deviation,
            max_tail_bound: r.max_tail_bound,
            explanation: r.explain(),
        })
        .collect();
    Ok(OracleCheckReport {
        meta,
        passed: cases.iter().all(|c| c.passed),
        l_max: cfg.l_max,
        tolerance: cfg.tolerance,
        m_max: cfg.m_max,
        cases,
        outcomes: per_outcome.into_values().collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct ChannelRow {
    pub pair: &'static str,
    pub m: i64,
    pub analytic: f64,
    pub estimate: f64,
    pub se: f64,
    pub count: u64,
    /// `None` when the analytic σ is zero and the count deviates.
    pub z: Option<f64>,
    pub p_value: f64,
    pub method: &'static str,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct SimulationReport {
    pub meta: Meta,
    pub passed: bool,
    pub t: f64,
    pub theta: f64,
    pub n_pairs: u64,
    pub round_trip_time: f64,
    pub pair_interval: f64,
    pub matching_window: f64,
    pub max_offset: u64,
    pub efficiency_corrected: bool,
    pub clicks: usize,
    pub matched_pairs: u64,
    pub unmatched_left: u64,
    pub unmatched_right: u64,
    pub channels: Vec<ChannelRow>,
}

impl SimulationReport {
    pub fn failing_channels(&self) -> Vec<String> {
        self.channels
            .iter()
            .filter(|c| !c.passed)
            .map(|c| match c.z {
                Some(z) => format!("{} m={} z={z:.2}", c.pair, c.m),
                None => format!("{} m={} (count {} where none expected)", c.pair, c.m, c.count),
            })
            .collect()
    }

    pub fn table(&self) -> Table {
        let rows = self
            .channels
            .iter()
            .map(|c| {
                vec![
                    Cell::Text(c.pair.to_owned()),
                    Cell::Int(c.m),
                    Cell::Num(c.analytic),
                    Cell::Num(c.estimate),
                    Cell::Num(c.se),
                    Cell::Int(c.count as i64),
                    Cell::Num(c.z.unwrap_or(f64::NAN)),
                    Cell::Text(c.passed.to_string()),
                ]
            })
            .collect();
        Table { columns: vec!["pair", "m", "analytic", "estimate", "se", "count", "z", "passed"], rows }
    }
}

pub fn simulate(cfg: &Simulate, meta: Meta) -> anyhow::Result<SimulationReport> {
    let m = mirrors("simulate", cfg.t)?;
    ensure!(cfg.theta.is_finite(), "simulate.theta = {} must be finite", cfg.theta);
    ensure!(cfg.n_pairs >= 1, "simulate.n_pairs must be at least 1");
    let rt = cfg.round_trip_time;
    ensure!(rt.is_finite() && rt > 0.0, "simulate.round_trip_time = {rt} must be positive");
    cfg.detectors.validate().context("simulate.detectors")?;

    let sampled = channel_distribution(&m, cfg.theta, SAMPLING_TAIL_TOLERANCE).context("simulate")?;
    let max_offset = sampled.m_max;
    let emission = match cfg.pair_interval {
        Some(p) => EmissionSettings { round_trip_time: rt, pair_interval: p },
        None => EmissionSettings::separated(rt, max_offset),
    };
    let window = cfg.matching_window.unwrap_or(rt / 4.0);
    let seed = meta.seed;

    let outcomes = sample_pair_outcomes(&m, cfg.theta, cfg.n_pairs, seed).context("simulate")?;
    let clicks = emit_click_streams(&outcomes, emission, &cfg.detectors, seed).context("simulate")?;
    drop(outcomes);
    if let Some(path) = &cfg.clicks_path {
        let file = File::create(path).with_context(|| format!("simulate.clicks_path {}", path.display()))?;
        let mut out = BufWriter::new(file);
        let ndjson = matches!(path.extension().and_then(|e| e.to_str()), Some("ndjson" | "jsonl"));
        if ndjson {
            io::write_clicks_ndjson(&mut out, &clicks)?;
        } else {
            out.write_all(meta.csv_comment().as_bytes())?;
            io::write_clicks_csv(&mut out, &clicks)?;
        }
        out.flush()?;
    }
    let settings = HistogramSettings { round_trip_time: rt, matching_window: window, max_offset };
    let hist = build_histogram(&clicks, settings, cfg.n_pairs).context("simulate")?;

    let reference = channel_distribution(&m, cfg.theta, REFERENCE_TAIL).context("simulate")?;
    let correction = cfg.correct_efficiency.then_some(&cfg.detectors);
    let checks = compare_with_analytic(&reference, &hist, cfg.n_pairs, correction);
    let channels: Vec<ChannelRow> = checks
        .iter()
        .map(|c| ChannelRow {
            pair: c.outcome.channel.detector_pair(),
            m: c.outcome.offset_m,
            analytic: c.analytic,
            estimate: c.estimate,
            se: c.std_error,
            count: c.count,
            z: c.z_score.is_finite().then_some(c.z_score),
            p_value: c.p_value,
            method: match c.method {
                CheckMethod::Normal => "normal",
                CheckMethod::ExactBinomial => "exact_binomial",
            },
            passed: c.passed,
        })
        .collect();
    Ok(SimulationReport {
        meta,
        passed: channels.iter().all(|c| c.passed),
        t: cfg.t,
        theta: cfg.theta,
        n_pairs: cfg.n_pairs,
        round_trip_time: rt,
        pair_interval: emission.pair_interval,
        matching_window: window,
        max_offset,
        efficiency_corrected: cfg.correct_efficiency,
        clicks: clicks.len(),
        matched_pairs: hist.matched_pairs(),
        unmatched_left: hist.unmatched_left,
        unmatched_right: hist.unmatched_right,
        channels,
    })
}
