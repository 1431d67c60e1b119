use std::f64::consts::PI;

use proptest::prelude::*;
use spikeclass::experiments::ExperimentConfig;
use spikeclass::intensity::kl_divergence;
use spikeclass::kernel::{fit, single_shape_estimate, variance_estimate};
use spikeclass::plugin::PluginClassifier;
use spikeclass::quad;
use spikeclass::rng::{derive_seed, stream};
use spikeclass::simulate::{generate_training_set, sample_poisson, PoissonSampler};
use spikeclass::{BayesRule, IntensityModel, KernelFamily, KernelSpec, Label, SpikeTrain};

fn model() -> impl Strategy<Value = IntensityModel> {
    prop_oneof![
        (0.01..20.0f64).prop_map(|r| IntensityModel::homogeneous(r).unwrap()),
        (0.0..2.0 * PI).prop_map(|p| IntensityModel::harmonic(p).unwrap()),
        (1.0..600.0f64, 1.0..50.0f64).prop_map(|(a, w)| IntensityModel::gaussian_bump(a, w).unwrap()),
        (0.0..2.0 * PI, 0.1..10.0f64).prop_map(|(p, f)| IntensityModel::scaled(
            IntensityModel::harmonic(p).unwrap(),
            f
        )
        .unwrap()),
    ]
}

/// Strictly increasing event times in `(0, window]`.
fn train(window: f64, max_events: usize) -> impl Strategy<Value = SpikeTrain> {
    prop::collection::vec(1e-6..=1.0f64, 0..max_events).prop_map(move |mut fr| {
        fr.sort_by(f64::total_cmp);
        fr.dedup();
        SpikeTrain::new(fr.into_iter().map(|f| f * window).collect(), window).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_mass_matches_quadrature(m in model(), a in 0.0..15.0f64, len in 0.0..15.0f64) {
        let b = a + len;
        let closed = m.mass(a, b);
        let numeric = quad::integrate_panels(|t| m.rate(t), a, b, 64);
        prop_assert!((closed - numeric).abs() <= 1e-8, "{closed} vs {numeric}");
    }

    #[test]
    fn divergence_is_nonnegative_and_zero_on_equal_shapes(p in 0.0..2.0 * PI, q in 0.0..2.0 * PI, t in 0.5..30.0f64) {
        let a = IntensityModel::harmonic(p).unwrap().shape_decompose(t).unwrap();
        let b = IntensityModel::harmonic(q).unwrap().shape_decompose(t).unwrap();
        prop_assert!(kl_divergence(&a, &b).unwrap() >= -1e-10);
        prop_assert!(kl_divergence(&a, &a).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn scaling_keeps_shape_and_multiplies_mass(p in 0.0..2.0 * PI, factor in 0.1..10.0f64, t in 0.5..30.0f64) {
        let base = IntensityModel::harmonic(p).unwrap();
        let a = base.shape_decompose(t).unwrap();
        let b = IntensityModel::scaled(base, factor).unwrap().shape_decompose(t).unwrap();
        prop_assert!((b.tau() - factor * a.tau()).abs() <= 1e-9 * b.tau());
        for i in 0..=100 {
            let s = t * i as f64 / 100.0;
            prop_assert!((a.shape(s) - b.shape(s)).abs() <= 1e-12);
        }
    }

    #[test]
    fn sampled_trains_are_ordered_inside_window_and_reproducible(m in model(), t in 0.1..10.0f64, seed: u64) {
        let x = sample_poisson(&m, t, seed).unwrap();
        prop_assert!(x.times().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(x.times().iter().all(|&s| s > 0.0 && s <= t));
        prop_assert_eq!(x, sample_poisson(&m, t, seed).unwrap());
    }

    #[test]
    fn homogeneous_rule_thresholds_the_count(
        r1 in 0.1..10.0f64, r2 in 0.1..10.0f64, t in 0.5..20.0f64, pi1 in 0.05..0.95f64, n in 0usize..100,
    ) {
        let rule = BayesRule::new(
            IntensityModel::homogeneous(r1).unwrap(),
            IntensityModel::homogeneous(r2).unwrap(),
            (pi1, 1.0 - pi1),
            t,
        ).unwrap();
        let x = SpikeTrain::new((0..n).map(|k| (k as f64 + 0.5) * t / n as f64).collect(), t).unwrap();
        let lhs = n as f64 * (r1 / r2).ln();
        let rhs = (r1 - r2) * t + ((1.0 - pi1) / pi1).ln();
        let expected = if lhs >= rhs { Label::Omega1 } else { Label::Omega2 };
        prop_assert_eq!(rule.decide(&x).unwrap(), expected);
    }

    #[test]
    fn decision_forms_agree(p in 0.0..2.0 * PI, q in 0.0..2.0 * PI, pi1 in 0.05..0.95f64, x in train(10.0, 60)) {
        let rule = BayesRule::new(
            IntensityModel::harmonic(p).unwrap(),
            IntensityModel::harmonic(q).unwrap(),
            (pi1, 1.0 - pi1),
            10.0,
        ).unwrap();
        let d = rule.decide(&x).unwrap();
        let (w, eta) = rule.decision_statistic(&x).unwrap();
        prop_assert_eq!(d, if w >= eta { Label::Omega1 } else { Label::Omega2 });
        prop_assert_eq!(d, rule.decide_shape_form(&x).unwrap());
        prop_assert_eq!(d, rule.decide_product_form(&x).unwrap());
    }

    #[test]
    fn swapping_classes_flips_bayes_decisions(p in 0.0..2.0 * PI, q in 0.0..2.0 * PI, pi1 in 0.05..0.95f64, x in train(8.0, 40)) {
        let (a, b) = (IntensityModel::harmonic(p).unwrap(), IntensityModel::harmonic(q).unwrap());
        let rule = BayesRule::new(a.clone(), b.clone(), (pi1, 1.0 - pi1), 8.0).unwrap();
        let swapped = BayesRule::new(b, a, (1.0 - pi1, pi1), 8.0).unwrap();
        let (w, eta) = rule.decision_statistic(&x).unwrap();
        prop_assume!((w - eta).abs() > 1e-9);
        prop_assert_eq!(rule.decide(&x).unwrap().other(), swapped.decide(&x).unwrap());
    }

    #[test]
    fn swapping_classes_flips_plugin_decisions(seed in 0u64..1000, x in train(6.0, 40)) {
        let (a, b) = (IntensityModel::harmonic(PI / 16.0).unwrap(), IntensityModel::harmonic(PI / 4.0).unwrap());
        let data = generate_training_set(&a, &b, (0.5, 0.5), 30, 6.0, seed).unwrap();
        prop_assume!(data.class_count(Label::Omega1) > 0 && data.class_count(Label::Omega2) > 0);
        let est = fit(&data, KernelFamily::Epanechnikov, (0.4, 0.7)).unwrap();
        let rule = PluginClassifier::from_estimate(&est).unwrap();
        let [c1, c2] = est.classes.clone();
        let (t1, t2) = (c1.tau_hat(), c2.tau_hat());
        let swapped = PluginClassifier::new([c2, c1], (t2, t1), (rule.priors().1, rule.priors().0), 6.0).unwrap();
        let (w, eta) = rule.statistic(&x).unwrap();
        prop_assume!((w - eta).abs() > 1e-9);
        prop_assert_eq!(rule.classify(&x).unwrap().other(), swapped.classify(&x).unwrap());
    }

    #[test]
    fn compact_single_shape_has_unit_mass(h in 0.05..1.0f64, x in train(1.0, 20)) {
        let window = 10.0;
        // Map events into [h, T − h] so the kernel mass stays inside the window.
        let times: Vec<f64> = x.times().iter().map(|&f| h + f * (window - 2.0 * h)).collect();
        prop_assume!(!times.is_empty());
        let y = SpikeTrain::new(times.clone(), window).unwrap();
        let k = KernelSpec::new(KernelFamily::Epanechnikov, h).unwrap();
        // The estimate is quadratic between consecutive support endpoints.
        let mut cuts: Vec<f64> = times.iter().flat_map(|&e| [e - h, e + h]).collect();
        cuts.sort_by(f64::total_cmp);
        let mass: f64 = cuts
            .windows(2)
            .map(|w| quad::integrate_panels(|t| single_shape_estimate(&y, &k, t), w[0], w[1], 1))
            .sum();
        prop_assert!((mass - 1.0).abs() <= 1e-8, "mass {mass}");
    }

    #[test]
    fn aggregated_variance_scales_inversely_with_training_size(p in 0.0..2.0 * PI, t in 1.0..9.0f64, h in 0.1..1.0f64, l in 1usize..500) {
        let m = IntensityModel::harmonic(p).unwrap();
        let k = KernelSpec::new(KernelFamily::Gaussian, h).unwrap();
        let one = variance_estimate(&m, &k, t, l, 10.0).unwrap();
        let ten = variance_estimate(&m, &k, t, 10 * l, 10.0).unwrap();
        prop_assert!((one / 10.0 - ten).abs() <= 1e-12 * one);
    }

    #[test]
    fn sampler_never_exceeds_its_dominating_rate(m in model(), t in 0.1..5.0f64) {
        let s = PoissonSampler::new(m.clone(), t).unwrap();
        for i in 0..=200 {
            prop_assert!(m.rate(t * i as f64 / 200.0) <= s.dominating_rate());
        }
    }

    #[test]
    fn config_round_trips_through_toml(seed: u64, runs in 1usize..50, n_test in 1usize..100_000, t in 0.1..50.0f64) {
        let c = ExperimentConfig { seed: seed >> 1, runs, n_test, t_window: t, ..ExperimentConfig::default() };
        prop_assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn derived_seeds_are_deterministic_and_path_sensitive(master: u64, a: u64, b: u64) {
        prop_assume!(a != b);
        prop_assert_eq!(derive_seed(master, &[a]), derive_seed(master, &[a]));
        prop_assert_ne!(derive_seed(master, &[a]), derive_seed(master, &[b]));
        let mut r1 = stream(derive_seed(master, &[a]), 3);
        let mut r2 = stream(derive_seed(master, &[a]), 3);
        prop_assert_eq!(rand::Rng::random::<u64>(&mut r1), rand::Rng::random::<u64>(&mut r2));
    }
}
