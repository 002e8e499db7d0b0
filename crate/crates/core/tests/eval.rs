use std::fs;

use reid_core::eval::*;
use reid_core::ingest::{load_manifest, save_feature_set, DatasetManifest, FeatureFormat};
use reid_core::synth::{gen_cross_view, SynthParams, SyntheticPair};
use reid_core::{Error, Exec, Label, NormalizationAxis};

fn pair(seed: u64, noise: f64) -> SyntheticPair {
    gen_cross_view(&SynthParams { n_ids: 50, dim: 12, view_noise: noise, distractors: 40, seed, ..Default::default() }).unwrap()
}

fn cfg() -> ExperimentConfig {
    ExperimentConfig { k: 4, max_rank: 0, ..Default::default() }
}

#[test]
fn row_axis_leaves_curve_untouched() {
    let s = pair(1, 0.8);
    let c = ExperimentConfig { normalization_axis: NormalizationAxis::PerProbeRow, ..cfg() };
    let r = run_on_views("x", &s.view_a, &s.view_b, s.distractors.as_ref(), &c, Exec::default()).unwrap();
    assert_eq!(r.with, r.without);
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let s = pair(2, 0.6);
    let a = run_on_views("x", &s.view_a, &s.view_b, None, &cfg(), Exec::Sequential).unwrap();
    let b = run_on_views("x", &s.view_a, &s.view_b, None, &cfg(), Exec::Parallel).unwrap();
    assert_eq!(a.render_csv(), b.render_csv());
    assert_eq!(a.render_folds_csv(), b.render_folds_csv());
}

#[test]
fn column_normalization_beats_raw_under_gallery_bias() {
    let s = pair(3, 0.3);
    let c = ExperimentConfig { column_bias: 1000.0, ..cfg() };
    let r = run_on_views("x", &s.view_a, &s.view_b, None, &c, Exec::default()).unwrap();
    assert!(r.with.ranks()[0] > r.without.ranks()[0] + 0.2);
}

#[test]
fn distractors_only_lower_rates() {
    let s = pair(4, 1.0);
    let base = run_on_views("x", &s.view_a, &s.view_b, None, &cfg(), Exec::default()).unwrap();
    let more = run_on_views("x", &s.view_a, &s.view_b, s.distractors.as_ref(), &cfg(), Exec::default()).unwrap();
    for (b, m) in base.folds.iter().zip(&more.folds) {
        for (x, y) in b.without.iter().zip(&m.without) {
            assert!(y <= x);
        }
    }
}

#[test]
fn fold_sizes_and_splits() {
    let labels: Vec<Label> = (0..632).map(|i| Label::new(format!("{i}"))).collect();
    let plan = make_splits(&labels, 10, 0).unwrap();
    assert_eq!(plan.folds.len(), 10);
    for f in &plan.folds {
        assert_eq!((f.train.len(), f.test.len()), (316, 316));
        assert!(f.train.iter().all(|l| !f.test.contains(l)));
    }
    assert!(matches!(make_splits(&labels[..1], 2, 0), Err(Error::TooFewIdentities { .. })));
}

#[test]
fn experiment_from_manifest_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let s = pair(5, 0.4);
    save_feature_set(&s.view_a, &dir.path().join("cam_a.bin"), FeatureFormat::Binary).unwrap();
    save_feature_set(&s.view_b, &dir.path().join("cam_b.csv"), FeatureFormat::Csv).unwrap();
    save_feature_set(s.distractors.as_ref().unwrap(), &dir.path().join("extra.bin"), FeatureFormat::Binary).unwrap();
    let m = DatasetManifest {
        name: "toy".into(),
        views: vec![("cam_a".into(), "cam_a.bin".into()), ("cam_b".into(), "cam_b.csv".into())],
        expected_dim: 12,
        distractor_file: Some("extra.bin".into()),
        notes: String::new(),
    };
    fs::write(dir.path().join("m.txt"), m.render()).unwrap();
    let manifest = load_manifest(&dir.path().join("m.txt")).unwrap();

    let cfg_path = dir.path().join("exp.cfg");
    fs::write(&cfg_path, "k=3\nseed=7\nmax_rank=20\nnormalization_axis=two_sided\n").unwrap();
    let c = ExperimentConfig::load(&cfg_path).unwrap();
    assert_eq!(c.normalization_axis, NormalizationAxis::TwoSided);
    let report = run_experiment(&manifest, &c).unwrap();
    assert_eq!(report.distractors, 40);
    assert_eq!(report.folds.len(), 3);

    let out = dir.path().join("out");
    write_report(&report, &out).unwrap();
    for f in ["report.txt", "report.csv", "folds.csv", "cmc_curve.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let text = fs::read_to_string(out.join("report.txt")).unwrap();
    for r in REPORT_RANKS {
        assert!(text.contains(&format!("Rank-{r}")));
    }
}

#[test]
fn same_probe_and_gallery_view_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = pair(6, 0.4);
    save_feature_set(&s.view_a, &dir.path().join("a.bin"), FeatureFormat::Binary).unwrap();
    save_feature_set(&s.view_b, &dir.path().join("b.bin"), FeatureFormat::Binary).unwrap();
    fs::write(dir.path().join("m.txt"), "name=t\nexpected_dim=12\nview.a=a.bin\nview.b=b.bin\n").unwrap();
    let manifest = load_manifest(&dir.path().join("m.txt")).unwrap();
    let c = ExperimentConfig { probe_view: Some("a".into()), gallery_view: Some("a".into()), ..cfg() };
    assert!(matches!(run_experiment(&manifest, &c), Err(Error::Config(_))));
}
