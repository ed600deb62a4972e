use mltr_core::stats::{paired_t_test, regularized_incomplete_beta};
use mltr_core::seeding;
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Textbook paired t statistic, two-pass, plus the two-sided tail from an
/// independent Student-t implementation.
fn textbook(d: &[f64]) -> (f64, f64) {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).unwrap();
    (t, 2.0 * dist.cdf(-t.abs()))
}

#[test]
fn matches_independent_computation() {
    let mut rng = seeding::rng_from_seed(2024);
    for _ in 0..20 {
        let n = rng.random_range(2..60);
        let shift = rng.random_range(-0.2..0.2);
        let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = a.iter().map(|x| x - shift + rng.random_range(-0.3..0.3)).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let r = paired_t_test(&a, &b).unwrap();
        let (t, p) = textbook(&d);
        assert_eq!(r.degrees_of_freedom, n - 1);
        assert!((r.t_statistic - t).abs() < 1e-9 * t.abs().max(1.0), "{} vs {t}", r.t_statistic);
        assert!((r.p_value - p).abs() < 1e-9, "{} vs {p}", r.p_value);
        assert_eq!(r.significant_at_0_01, p < 0.01);
    }
}

#[test]
fn reference_difference_vector() {
    // 40-digit reference for d = [0.1, 0.2, 0.15, 0.05, 0.3]
    let a = [0.1, 0.2, 0.15, 0.05, 0.3];
    let r = paired_t_test(&a, &[0.0; 5]).unwrap();
    assert!((r.t_statistic - 3.719_924_439_802_217).abs() < 1e-9);
    assert!((r.p_value - 0.020_475_874_420_910_685).abs() < 1e-9);
    assert!(!r.significant_at_0_01);
}

#[test]
fn trivial_cases() {
    let a = [0.3, 0.5, 0.9];
    let same = paired_t_test(&a, &a).unwrap();
    assert!(same.zero_variance);
    assert_eq!((same.t_statistic, same.p_value, same.significant_at_0_01), (0.0, 1.0, false));

    let sym = paired_t_test(&[1.0, -1.0], &[0.0, 0.0]).unwrap();
    assert_eq!((sym.t_statistic, sym.p_value), (0.0, 1.0));

    let shifted = paired_t_test(&[1.0, 2.0, 3.0], &[0.5, 1.5, 2.5]).unwrap();
    assert!(shifted.zero_variance && shifted.p_value == 0.0 && shifted.t_statistic.is_infinite());

    assert!(paired_t_test(&[1.0], &[0.0]).is_err());
    assert!(paired_t_test(&[1.0, 2.0], &[0.0]).is_err());
}

#[test]
fn incomplete_beta_against_statrs() {
    let mut rng = seeding::rng_from_seed(7);
    for _ in 0..200 {
        let a = rng.random_range(0.1..40.0);
        let b = rng.random_range(0.1..40.0);
        let x = rng.random::<f64>();
        let expected = statrs::function::beta::beta_reg(a, b, x);
        assert!((regularized_incomplete_beta(x, a, b) - expected).abs() < 1e-11, "a={a} b={b} x={x}");
    }
}

proptest! {
    #[test]
    fn swapping_samples_negates_t(a in prop::collection::vec(0.0f64..1.0, 2..30), seed in any::<u64>()) {
        let mut rng = seeding::rng_from_seed(seed);
        let b: Vec<f64> = a.iter().map(|x| x + rng.random_range(-0.5..0.5)).collect();
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        prop_assert_eq!(ab.t_statistic, -ba.t_statistic);
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }
}
