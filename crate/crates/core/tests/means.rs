use proptest::prelude::*;

use hrlab::means::{
    covariance, harmonic_mean, mixed_sign_harmonic_mean, partition_dependence_witness,
    rate_equivalence_report, DiscreteJoint, MeansError, PairedSeries, RateEquivalence,
    MAX_TIME_EVENTS,
};

fn entry() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 9 => -100.0..=100.0f64]
}

fn multiset() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(entry(), 1..=20)
}

proptest! {
    #[test]
    fn internal(x in multiset()) {
        let h = mixed_sign_harmonic_mean(&x).unwrap();
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-12 <= h && h <= hi + 1e-12);
    }

    #[test]
    fn order_free(x in multiset(), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut y = x.clone();
        y.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(
            mixed_sign_harmonic_mean(&x).unwrap().to_bits(),
            mixed_sign_harmonic_mean(&y).unwrap().to_bits()
        );
    }

    #[test]
    fn constant_input(c in entry(), n in 1usize..=10) {
        prop_assert_eq!(mixed_sign_harmonic_mean(&vec![c; n]).unwrap(), c);
    }

    #[test]
    fn same_sign_increase_never_lowers(x in multiset(), i in any::<prop::sample::Index>(), k in 1e-9..100.0f64) {
        let i = i.index(x.len());
        prop_assume!(x[i] != 0.0 && (x[i] > 0.0) == (x[i] + k > 0.0));
        let mut y = x.clone();
        y[i] += k;
        prop_assert!(
            mixed_sign_harmonic_mean(&y).unwrap() >= mixed_sign_harmonic_mean(&x).unwrap() - 1e-12
        );
    }

    #[test]
    fn single_sign_matches_classical(x in prop::collection::vec(1e-3..100.0f64, 1..=20), neg in any::<bool>()) {
        let x: Vec<f64> = if neg { x.iter().map(|v| -v).collect() } else { x };
        let oracle = x.len() as f64 / x.iter().map(|v| 1.0 / v).sum::<f64>();
        prop_assert!((mixed_sign_harmonic_mean(&x).unwrap() - oracle).abs() <= 1e-12);
        prop_assert!((harmonic_mean(&x).unwrap() - oracle).abs() <= 1e-12);
    }

    #[test]
    fn identity_holds(pairs in prop::collection::vec((0.01..10.0f64, 0.01..10.0f64), 1..40)) {
        let (r, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let series = PairedSeries::new(r, t).unwrap();
        let rep = rate_equivalence_report(&series, 1e-9).unwrap();
        let via = RateEquivalence::identity_rate(&series).unwrap();
        prop_assert!((via - rep.harmonic_rate).abs() <= 1e-9 * rep.harmonic_rate.abs().max(1.0));
    }
}

#[test]
fn not_quasi_arithmetic() {
    let whole = mixed_sign_harmonic_mean(&[1.0, 1.0, -1.0, -4.0]).unwrap();
    let block = mixed_sign_harmonic_mean(&[1.0, -1.0]).unwrap();
    let replaced = mixed_sign_harmonic_mean(&[1.0, block, block, -4.0]).unwrap();
    assert_eq!(block, 0.0);
    assert_ne!(whole, replaced);
    assert!((whole + 0.3).abs() < 1e-12 && (replaced + 0.75).abs() < 1e-12);
}

#[test]
fn monotonicity_breaks_across_zero() {
    let at_zero = mixed_sign_harmonic_mean(&[0.0, 100.0]).unwrap();
    let nudged = mixed_sign_harmonic_mean(&[0.5, 100.0]).unwrap();
    assert_eq!(at_zero, 50.0);
    assert!(nudged < 1.0);
}

#[test]
fn errors() {
    assert!(matches!(
        mixed_sign_harmonic_mean(&[]),
        Err(MeansError::EmptyInput)
    ));
    assert!(matches!(
        covariance(&[1.0], &[1.0, 2.0]),
        Err(MeansError::LengthMismatch { .. })
    ));
    let zero_reward = PairedSeries::new(vec![1.0, 0.0], vec![1.0, 1.0]).unwrap();
    assert!(matches!(
        rate_equivalence_report(&zero_reward, 1e-9),
        Err(MeansError::DomainViolation { index: 1, .. })
    ));
    let m = MAX_TIME_EVENTS + 1;
    let mut pos = vec![0.0; m];
    pos[0] = 1.0;
    let big = DiscreteJoint::new(pos, vec![0.0; m], vec![0.0; m]).unwrap();
    assert!(matches!(
        partition_dependence_witness(&big, 1e-9),
        Err(MeansError::TooManyEvents(_))
    ));
    assert!(DiscreteJoint::new(vec![0.5], vec![0.6], vec![0.0]).is_err());
}

#[test]
fn witness_at_the_event_limit() {
    let m = MAX_TIME_EVENTS;
    let mut pos = vec![0.0; m];
    let mut neg = vec![0.0; m];
    pos[0] = 0.5;
    neg[m - 1] = 0.5;
    let joint = DiscreteJoint::new(pos, neg, vec![0.0; m]).unwrap();
    let w = partition_dependence_witness(&joint, 1e-9).unwrap().unwrap();
    assert_eq!(w.events, vec![0]);
    assert!((w.gap - 0.25).abs() < 1e-15);
}
