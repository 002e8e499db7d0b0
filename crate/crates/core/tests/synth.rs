use nalgebra::DMatrix;

use reid_core::eval::{run_on_views, ExperimentConfig};
use reid_core::synth::*;
use reid_core::xqda::{solve_xqda, train, Ridge, XqdaOptions};
use reid_core::{DifferenceSets, Exec, RPolicy, XqdaModel};

#[test]
fn generation_is_reproducible() {
    let p = SynthParams { n_ids: 30, dim: 8, images_per_view: 2, distractors: 5, seed: 4, ..Default::default() };
    let a = gen_cross_view(&p).unwrap();
    let b = gen_cross_view(&p).unwrap();
    assert_eq!(a.view_a, b.view_a);
    assert_eq!(a.view_b, b.view_b);
    assert_eq!(a.distractors, b.distractors);
    assert_eq!(a.view_a.len(), 60);
    assert_eq!(a.distractors.unwrap().len(), 5);
}

#[test]
fn zero_noise_is_perfectly_matched() {
    let s = gen_cross_view(&SynthParams { n_ids: 60, dim: 16, view_noise: 0.0, seed: 2, ..Default::default() }).unwrap();
    let cfg = ExperimentConfig { k: 4, ..Default::default() };
    let r = run_on_views("z", &s.view_a, &s.view_b, None, &cfg, Exec::default()).unwrap();
    assert_eq!(r.without.ranks()[0], 1.0);
}

#[test]
fn indistinguishable_identities_match_at_chance() {
    let n_ids = 20;
    let s = gen_cross_view(&SynthParams {
        n_ids,
        dim: 8,
        images_per_view: 10,
        identity_spread: 0.0,
        view_noise: 1.0,
        seed: 8,
        ..Default::default()
    })
    .unwrap();
    let cfg = ExperimentConfig { k: 10, max_rank: 1, ..Default::default() };
    let r = run_on_views("c", &s.view_a, &s.view_b, None, &cfg, Exec::default()).unwrap();
    // multi-shot gallery of 10 test identities: chance is 1/10
    let chance = 1.0 / (n_ids as f64 / 2.0);
    let r1 = r.without.ranks()[0];
    assert!((r1 - chance).abs() <= 0.05, "rank-1 {r1} vs chance {chance}");
}

#[test]
fn residual_oracle_catches_a_corrupted_projection() {
    let s = gen_cross_view(&SynthParams { n_ids: 50, dim: 10, view_noise: 0.5, seed: 3, ..Default::default() }).unwrap();
    let opts = XqdaOptions { r_policy: RPolicy::Fixed(4), ..Default::default() };
    let good = train(&s.view_a, &s.view_b, 1, 0, &opts).unwrap();
    assert!(oracle_eigen_residual(&good).unwrap() <= 1e-8);

    let mut w = good.w().clone();
    w.swap_columns(0, 3);
    let bad = XqdaModel::new(w, good.eigenvalues().to_vec(), good.metric().clone(), good.ridge(), good.training().cloned()).unwrap();
    assert!(oracle_eigen_residual(&bad).unwrap() > 0.1);
}

#[test]
fn hand_case_residual_is_exact() {
    let xs = DMatrix::from_row_slice(2, 4, &[2.0, 2.0, 2.0, 2.0, 1.0, 1.0, -1.0, -1.0]);
    let xd = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0]);
    let opts = XqdaOptions {
        ridge: Ridge::Fixed(0.0),
        r_policy: RPolicy::Fixed(2),
        invert_quotient: false,
        ..Default::default()
    };
    let model = solve_xqda(&DifferenceSets::new(xs, xd, 0).unwrap(), &opts).unwrap();
    assert!(oracle_eigen_residual(&model).unwrap() <= 1e-14);
}

#[test]
fn view_transform_is_orthogonal() {
    let r = view_transform(12, 5, 77);
    assert!((r.transpose() * &r - DMatrix::identity(12, 12)).amax() <= 1e-12);
    let q = random_orthogonal(7, 1);
    assert!((q.transpose() * &q - DMatrix::identity(7, 7)).amax() <= 1e-12);
}
