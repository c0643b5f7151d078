use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use fp_biphoton::clicksim::{
    build_histogram, compare_with_analytic, emit_click_streams, estimate_rates, fringe_visibility, io,
    sample_pair_outcomes, ClickEvent, DetectorModel, Efficiencies, EmissionSettings, HistogramSettings,
    SAMPLING_TAIL_TOLERANCE,
};
use fp_biphoton::{channel_distribution, transmission_coincidence_rate, DetectionOutcome, MirrorCoefficients};

const RT: f64 = 1e-9;

fn mirror(t: f64) -> MirrorCoefficients {
    MirrorCoefficients::from_transmission(t).unwrap()
}

struct Run {
    outcomes: Vec<DetectionOutcome>,
    clicks: Vec<ClickEvent>,
    settings: HistogramSettings,
}

fn run(t: f64, theta: f64, n: u64, detectors: &DetectorModel, seed: u64) -> Run {
    let m = mirror(t);
    let m_max = channel_distribution(&m, theta, SAMPLING_TAIL_TOLERANCE).unwrap().m_max;
    let outcomes = sample_pair_outcomes(&m, theta, n, seed).unwrap();
    let clicks = emit_click_streams(&outcomes, EmissionSettings::separated(RT, m_max), detectors, seed).unwrap();
    let settings = HistogramSettings { round_trip_time: RT, matching_window: RT / 4.0, max_offset: m_max };
    Run { outcomes, clicks, settings }
}

fn tally(outcomes: &[DetectionOutcome]) -> BTreeMap<DetectionOutcome, u64> {
    let mut map = BTreeMap::new();
    for o in outcomes {
        *map.entry(*o).or_insert(0) += 1;
    }
    map
}

#[test]
fn ideal_pipeline_recovers_every_channel() {
    for (t, theta) in [(0.5, 0.0), (0.2, FRAC_PI_2), (0.5, PI)] {
        let n = 200_000;
        let r = run(t, theta, n, &DetectorModel::ideal(), 11);
        let hist = build_histogram(&r.clicks, r.settings, n).unwrap();
        // ideal detectors, no jitter: the histogram is the outcome tally
        assert_eq!(hist.bins, tally(&r.outcomes));
        assert_eq!((hist.unmatched_left, hist.unmatched_right), (0, 0));
        let dist = channel_distribution(&mirror(t), theta, 1e-12).unwrap();
        let checks = compare_with_analytic(&dist, &hist, n, None);
        let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
        assert!(failed.is_empty(), "T={t}, θ={theta}: {failed:?}");
    }
}

#[test]
fn jitter_keeps_pairs_in_their_bins() {
    let n = 100_000;
    let jittery = DetectorModel { timing_jitter_sigma: RT / 100.0, ..DetectorModel::ideal() };
    let r = run(0.5, 0.0, n, &jittery, 5);
    let hist = build_histogram(&r.clicks, r.settings, n).unwrap();
    let truth = tally(&r.outcomes);
    let correct: u64 = truth.iter().map(|(o, &c)| c.min(hist.count(o))).sum();
    assert!(correct as f64 >= 0.999 * n as f64, "{correct} of {n}");
}

#[test]
fn sparse_dark_counts_add_few_accidentals() {
    let n = 100_000;
    // 2e4 /s per detector: ~1e-5 expected darks per 5e-10 s window
    let dark = DetectorModel { dark_count_rate: 2e4, ..DetectorModel::ideal() };
    let r = run(0.5, 0.0, n, &dark, 9);
    let n_dark = r.clicks.len() as u64 - 2 * n;
    assert!(n_dark > 0);
    let hist = build_histogram(&r.clicks, r.settings, n).unwrap();
    let truth = tally(&r.outcomes);
    let accidental: u64 = hist.bins.iter().map(|(o, &c)| c.saturating_sub(truth.get(o).copied().unwrap_or(0))).sum();
    assert!((accidental as f64) < 0.01 * n as f64, "{accidental} accidentals");
}

#[test]
fn efficiency_scales_counts_and_correction_restores_them() {
    let n = 400_000;
    let half = DetectorModel { efficiency: Efficiencies::uniform(0.5), ..DetectorModel::ideal() };
    let r = run(0.5, 0.0, n, &half, 21);
    let hist = build_histogram(&r.clicks, r.settings, n).unwrap();
    let tt = DetectionOutcome::transmission_coincidence();
    let p = transmission_coincidence_rate(&mirror(0.5), 0.0);

    let raw = estimate_rates(&hist, n, None)[&tt];
    let corrected = estimate_rates(&hist, n, Some(&half))[&tt];
    let sigma_raw = (0.25 * p * (1.0 - 0.25 * p) / n as f64).sqrt();
    assert!((raw.rate - 0.25 * p).abs() < 5.0 * sigma_raw, "{} vs {}", raw.rate, 0.25 * p);
    assert!((corrected.rate - p).abs() < 5.0 * corrected.std_error);

    let dist = channel_distribution(&mirror(0.5), 0.0, 1e-12).unwrap();
    let checks = compare_with_analytic(&dist, &hist, n, Some(&half));
    assert!(checks.iter().all(|c| c.passed), "{:?}", checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
}

#[test]
fn uneven_efficiencies_factorize_per_channel() {
    let n = 400_000;
    let model = DetectorModel {
        efficiency: Efficiencies { l1: 0.9, l2: 0.4, r1: 0.7, r2: 0.6 },
        ..DetectorModel::ideal()
    };
    let r = run(0.5, 1.0, n, &model, 3);
    let hist = build_histogram(&r.clicks, r.settings, n).unwrap();
    let dist = channel_distribution(&mirror(0.5), 1.0, 1e-12).unwrap();
    let checks = compare_with_analytic(&dist, &hist, n, Some(&model));
    assert!(checks.iter().all(|c| c.passed));
}

fn tt_visibility(dark_rate: f64) -> f64 {
    let n = 100_000;
    let model = DetectorModel { dark_count_rate: dark_rate, ..DetectorModel::ideal() };
    let tt = DetectionOutcome::transmission_coincidence();
    let scan: Vec<(f64, f64)> = (0..8)
        .map(|i| {
            let theta = i as f64 * TAU / 8.0;
            let r = run(0.5, theta, n, &model, 100 + i);
            let hist = build_histogram(&r.clicks, r.settings, n).unwrap();
            (theta, hist.count(&tt) as f64 / n as f64)
        })
        .collect();
    fringe_visibility(&scan).unwrap()
}

#[test]
fn dark_counts_wash_out_fringes() {
    let v: Vec<f64> = [0.0, 5e6, 2e7].into_iter().map(tt_visibility).collect();
    assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
    let r4 = mirror(0.5).r4();
    let ideal = 2.0 * r4 / (1.0 + r4 * r4);
    assert!((v[0] - ideal).abs() < 0.02, "{} vs {ideal}", v[0]);
}

fn serialized(clicks: &[ClickEvent]) -> Vec<u8> {
    let mut buf = Vec::new();
    io::write_clicks_csv(&mut buf, clicks).unwrap();
    buf
}

#[test]
fn streams_are_bitwise_reproducible_across_thread_counts() {
    let model = DetectorModel { timing_jitter_sigma: 1e-11, dark_count_rate: 1e5, ..DetectorModel::ideal() };
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = single.install(|| serialized(&run(0.2, 1.3, 20_000, &model, 77).clicks));
    let b = many.install(|| serialized(&run(0.2, 1.3, 20_000, &model, 77).clicks));
    let c = many.install(|| serialized(&run(0.2, 1.3, 20_000, &model, 78).clicks));
    assert_eq!(a, b);
    assert_ne!(a, c);
}
