use std::f64::consts::{PI, TAU};

use fp_biphoton::biphoton::channel_amplitude;
use fp_biphoton::oracle::{adaptive_l_max, compare_with_closed_form, enumerate_single_photon_paths, Port};
use fp_biphoton::phase::{reduce_mod_2pi, reduce_mod_2pi_dd, DoubleDouble};
use fp_biphoton::{channel_distribution, channel_rate, transmission_coincidence_rate, Channel, DetectionOutcome, MirrorCoefficients};
use proptest::prelude::*;

fn mirror(t: f64) -> MirrorCoefficients {
    MirrorCoefficients::from_transmission(t).unwrap()
}

fn channel() -> impl Strategy<Value = Channel> {
    prop::sample::select(Channel::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn probabilities_sum_to_one(t in 0.05f64..0.95, theta in 0.0f64..TAU) {
        let dist = channel_distribution(&mirror(t), theta, 1e-12).unwrap();
        let total = dist.total() + dist.tail_bound;
        prop_assert!((total - 1.0).abs() < 1e-9, "total {total}");
        prop_assert!(dist.probabilities.values().all(|p| *p >= 0.0));
    }

    #[test]
    fn rates_periodic_and_even_in_theta(
        t in 0.05f64..0.95,
        theta in -10.0f64..10.0,
        c in channel(),
        m in -6i64..=6,
    ) {
        let mirrors = mirror(t);
        let o = DetectionOutcome::new(c, m);
        let base = channel_rate(&mirrors, theta, o);
        let tol = 1e-12 * base;
        prop_assert!((channel_rate(&mirrors, theta + TAU, o) - base).abs() <= tol);
        prop_assert!((channel_rate(&mirrors, -theta, o) - base).abs() <= tol);
        // real rational function of e^{iθ}: A(−θ) = conj A(θ)
        let a = channel_amplitude(&mirrors, theta, o).value;
        let b = channel_amplitude(&mirrors, -theta, o).value;
        prop_assert!((a.conj() - b).norm() <= 1e-12 * a.norm().max(1e-300));
    }

    #[test]
    fn offset_tail_is_geometric(
        t in 0.05f64..0.95,
        theta in 0.0f64..TAU,
        c in channel(),
        m in 1i64..=10,
        negative in any::<bool>(),
    ) {
        let mirrors = mirror(t);
        let sign = if negative { -1 } else { 1 };
        let near = channel_rate(&mirrors, theta, DetectionOutcome::new(c, sign * m));
        let far = channel_rate(&mirrors, theta, DetectionOutcome::new(c, sign * (m + 1)));
        let expected = mirrors.r4() * near;
        prop_assert!((far - expected).abs() <= 1e-12 * expected, "{far} vs {expected}");
    }

    #[test]
    fn tt_rate_matches_channel_formula(t in 0.01f64..0.99, theta in 0.0f64..TAU) {
        let mirrors = mirror(t);
        let direct = channel_rate(&mirrors, theta, DetectionOutcome::transmission_coincidence());
        let stable = transmission_coincidence_rate(&mirrors, theta);
        prop_assert!((direct - stable).abs() <= 1e-11 * stable);
    }

    #[test]
    fn closed_form_matches_path_sums(
        t in 0.1f64..0.9,
        theta in 0.0f64..TAU,
        c in channel(),
        m in -8i64..=8,
    ) {
        let mirrors = mirror(t);
        let l_max = adaptive_l_max(&mirrors, 8, 1e-13).unwrap();
        let outcome = DetectionOutcome::new(c, m);
        // a huge tolerance keeps the report; the bound is checked per entry
        let report = compare_with_closed_form(&mirrors, theta, &[outcome], l_max, 1.0).unwrap();
        let e = &report.entries[0];
        prop_assert!(
            e.deviation <= e.tail_bound + e.rounding_bound,
            "{outcome}: deviation {:e}, tail {:e}, rounding {:e}", e.deviation, e.tail_bound, e.rounding_bound
        );
    }

    #[test]
    fn single_photon_paths_conserve_probability(t in 0.2f64..0.95, theta in 0.0f64..TAU) {
        // with a fixed single-photon phase the two ports' intensities add to 1
        let mirrors = mirror(t);
        let paths = fp_biphoton::oracle::enumerate_single_photon_paths_with_phase(&mirrors, 4000, theta);
        let mut out = [num_complex::Complex64::new(0.0, 0.0); 2];
        for p in &paths {
            let idx = usize::from(p.port == Port::Reflect);
            out[idx] += p.amplitude;
        }
        let total = out[0].norm_sqr() + out[1].norm_sqr();
        prop_assert!((total - 1.0).abs() < 1e-9, "total {total}");
    }

    #[test]
    fn reduction_lands_in_range_and_respects_period(x in -1e6f64..1e6, k in -1000i64..1000) {
        let r = reduce_mod_2pi(x);
        prop_assert!((0.0..TAU).contains(&r));
        // x + 2πk in double-double so the shift itself is exact
        let shifted = DoubleDouble::from_f64(x)
            .add(DoubleDouble::product(k as f64, TAU))
            .add(DoubleDouble::product(k as f64, 2.449_293_598_294_706_4e-16));
        let rs = reduce_mod_2pi_dd(shifted).unwrap();
        let gap = (rs - r).abs();
        prop_assert!(gap.min(TAU - gap) < 1e-12, "{r} vs {rs}");
    }
}

#[test]
fn prompt_reflection_sign_and_rr_positivity() {
    for t in [0.05, 0.2, 0.5, 0.8, 0.95] {
        let mirrors = mirror(t);
        let prompt = enumerate_single_photon_paths(&mirrors, 3)
            .into_iter()
            .find(|p| p.port == Port::Reflect && p.round_trips == 0)
            .unwrap();
        assert_eq!(prompt.amplitude, num_complex::Complex64::new(-mirrors.r(), 0.0));
        let rr = channel_amplitude(&mirrors, 0.0, DetectionOutcome::reflection_coincidence()).value;
        assert!(rr.re > 0.0 && rr.im == 0.0, "T={t}: {rr}");
    }
}

#[test]
fn anti_resonance_and_resonance_extremes() {
    let mirrors = mirror(0.5);
    let on = transmission_coincidence_rate(&mirrors, 0.0);
    let off = transmission_coincidence_rate(&mirrors, PI);
    let r4 = mirrors.r4();
    let ratio = ((1.0 + r4) / (1.0 - r4)).powi(2);
    assert!((on / off - ratio).abs() < 1e-12 * ratio);
}
