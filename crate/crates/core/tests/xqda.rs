use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use reid_core::synth::{gen_cross_view, oracle_eigen_residual, SynthParams};
use reid_core::xqda::*;
use reid_core::{DifferenceSets, Error, Exec, FeatureSet, Label, RPolicy};

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_diffs(seed: u64, d: usize) -> DifferenceSets {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ms = gaussian(&mut rng, d, d);
    let md = gaussian(&mut rng, d, d);
    DifferenceSets::new(ms * gaussian(&mut rng, d, 5 * d), md * gaussian(&mut rng, d, 7 * d), seed).unwrap()
}

#[test]
fn covariance_matches_naive_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = gaussian(&mut rng, 5, 40);
    let got = covariance(&x).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let mut s = 0.0;
            for k in 0..40 {
                s += x[(i, k)] * x[(j, k)];
            }
            assert!((got[(i, j)] - s / 40.0).abs() <= 1e-12);
        }
    }
    assert_eq!(got, got.transpose());
}

#[test]
fn covariance_exec_modes_agree_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = gaussian(&mut rng, 33, 500);
    assert_eq!(
        covariance_with(&x, Exec::Sequential).unwrap(),
        covariance_with(&x, Exec::Parallel).unwrap()
    );
}

#[test]
fn random_d6_residual() {
    for seed in 0..10 {
        let diffs = random_diffs(seed, 6);
        let opts = XqdaOptions {
            r_policy: RPolicy::Fixed(6),
            ..Default::default()
        };
        let model = solve_xqda(&diffs, &opts).unwrap();
        assert!(oracle_eigen_residual(&model).unwrap() <= 1e-8);
        assert!(model.eigenvalues().windows(2).all(|p| p[0] >= p[1]));
    }
}

#[test]
fn uniform_rescaling_keeps_r_and_eigenvalues() {
    let diffs = random_diffs(3, 8);
    let scaled = DifferenceSets::new(diffs.xs() * 7.5, diffs.xd() * 7.5, 3).unwrap();
    let opts = XqdaOptions {
        ridge: Ridge::Fixed(0.0),
        ..Default::default()
    };
    let a = solve_xqda(&diffs, &opts).unwrap();
    let b = solve_xqda(&scaled, &opts).unwrap();
    assert_eq!(a.r(), b.r());
    for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
        assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
    }
}

#[test]
fn training_is_deterministic() {
    let s = gen_cross_view(&SynthParams {
        n_ids: 40,
        dim: 10,
        view_noise: 0.4,
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let opts = XqdaOptions::default();
    let a = train(&s.view_a, &s.view_b, 2, 17, &opts).unwrap();
    let b = train(&s.view_a, &s.view_b, 2, 17, &XqdaOptions { exec: Exec::Sequential, ..opts }).unwrap();
    assert_eq!(model_to_bytes(&a), model_to_bytes(&b));
}

#[test]
fn difference_sets_follow_labels() {
    let labels = |v: &[&str]| v.iter().map(|s| Label::new(*s)).collect::<Vec<_>>();
    let a = FeatureSet::new("a", DMatrix::from_row_slice(1, 3, &[0.0, 10.0, 20.0]), labels(&["x", "y", "z"])).unwrap();
    let b = FeatureSet::new("b", DMatrix::from_row_slice(1, 3, &[1.0, 12.0, 5.0]), labels(&["x", "y", "q"])).unwrap();
    let diffs = build_difference_sets(&a, &b, 10, 0).unwrap();
    assert_eq!(diffs.xs().as_slice(), &[-1.0, -2.0]);
    // every cross-label pair: 9 total minus 2 positives
    assert_eq!(diffs.n_d(), 7);

    let lone = FeatureSet::new("c", DMatrix::from_row_slice(1, 2, &[0.0, 1.0]), labels(&["m", "n"])).unwrap();
    assert!(matches!(build_difference_sets(&a, &lone, 1, 0), Err(Error::NoSharedIdentities)));
}

#[test]
fn threshold_policy_keeps_at_least_one() {
    let diffs = random_diffs(4, 5);
    let opts = XqdaOptions {
        r_policy: RPolicy::EigenvalueThreshold(1e12),
        ..Default::default()
    };
    assert_eq!(solve_xqda(&diffs, &opts).unwrap().r(), 1);
    let too_many = XqdaOptions {
        r_policy: RPolicy::Fixed(6),
        ..Default::default()
    };
    assert!(matches!(solve_xqda(&diffs, &too_many), Err(Error::BadParams(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn model_bytes_round_trip(seed in any::<u64>(), d in 2usize..10) {
        let model = solve_xqda(&random_diffs(seed, d), &XqdaOptions::default()).unwrap();
        let back = model_from_bytes(&model_to_bytes(&model)).unwrap();
        prop_assert_eq!(model_to_bytes(&back), model_to_bytes(&model));
    }

    #[test]
    fn metric_is_symmetric_and_eigenvalues_positive(seed in any::<u64>(), d in 2usize..9) {
        let model = solve_xqda(&random_diffs(seed, d), &XqdaOptions::default()).unwrap();
        let m = model.metric();
        prop_assert!((m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0));
        prop_assert!(model.eigenvalues().iter().all(|&l| l > 0.0));
    }
}
