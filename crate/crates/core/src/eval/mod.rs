//! Evaluation protocol: identity splits, CMC curves, repeated-split
//! experiments and table-style reports.
//!
//! Each fold trains on half of the identities shared by the two views and
//! tests on the other half. Test probes come from the probe view; the
//! gallery holds the test identities' images from the gallery view plus any
//! distractors. Scores are normalized per fold, and both the raw and the
//! normalized arm are reported.

mod cmc;
mod config;
mod report;
mod split;

use std::collections::BTreeSet;

pub use cmc::{cmc, cmc_with};
pub use config::ExperimentConfig;
pub use report::{write_report, REPORT_RANKS};
pub use split::{make_splits, Fold, SplitPlan};

use crate::datamodel::{CmcResult, FeatureSet, Label};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::ingest::DatasetManifest;
use crate::matcher::{score_matrix_with, MatchOptions};
use crate::normalize::minmax_normalize_with;
use crate::synth::column_bias_offsets;
use crate::xqda::{shared_labels, train};

/// Per-fold outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub fold: usize,
    pub r: usize,
    pub train_ids: usize,
    pub test_ids: usize,
    pub probes: usize,
    pub gallery: usize,
    pub without: Vec<f64>,
    pub with: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub dataset: String,
    pub config: ExperimentConfig,
    pub probe_view: String,
    pub gallery_view: String,
    pub distractors: usize,
    pub folds: Vec<FoldOutcome>,
    /// Raw scores.
    pub without: CmcResult,
    /// Min-max normalized along `config.normalization_axis`.
    pub with: CmcResult,
}

/// Load the views named by `config` (or the manifest's first two) and run
/// the repeated-split protocol.
pub fn run_experiment(manifest: &DatasetManifest, config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(manifest, config, Exec::default())
}

pub fn run_experiment_with(
    manifest: &DatasetManifest,
    config: &ExperimentConfig,
    exec: Exec,
) -> Result<ExperimentReport> {
    let probe_id = config
        .probe_view
        .clone()
        .unwrap_or_else(|| manifest.views[0].0.clone());
    let gallery_id = config
        .gallery_view
        .clone()
        .unwrap_or_else(|| manifest.views[1].0.clone());
    if probe_id == gallery_id {
        return Err(Error::Config(format!(
            "probe and gallery view are both `{probe_id}`"
        )));
    }
    let probes = manifest.load_view(&probe_id)?;
    let gallery = manifest.load_view(&gallery_id)?;
    let distractors = manifest.load_distractors()?;
    run_on_views(&manifest.name, &probes, &gallery, distractors.as_ref(), config, exec)
}

fn run_fold(
    fold_idx: usize,
    fold: &Fold,
    probe_view: &FeatureSet,
    gallery_view: &FeatureSet,
    distractors: Option<&FeatureSet>,
    config: &ExperimentConfig,
    exec: Exec,
) -> Result<FoldOutcome> {
    let train_ids: BTreeSet<&Label> = fold.train.iter().collect();
    let test_ids: BTreeSet<&Label> = fold.test.iter().collect();
    let fold_seed = config.seed.wrapping_add(fold_idx as u64);

    let train_a = probe_view.filter_labels(|l| train_ids.contains(l));
    let train_b = gallery_view.filter_labels(|l| train_ids.contains(l));
    let mut opts = config.xqda_options();
    opts.exec = exec;
    let model = train(&train_a, &train_b, config.negatives_per_positive, fold_seed, &opts)?;

    let probes = probe_view.filter_labels(|l| test_ids.contains(l));
    let mut gallery = gallery_view.filter_labels(|l| test_ids.contains(l));
    if config.single_gallery_shot {
        gallery = gallery.first_per_label();
    }
    if let Some(d) = distractors {
        gallery = gallery.concat(d)?;
    }

    let match_opts = MatchOptions {
        exec,
        ..Default::default()
    };
    let mut scores = score_matrix_with(&model, &probes, &gallery, &match_opts)?;
    if config.column_bias > 0.0 {
        let offsets = column_bias_offsets(gallery.len(), config.column_bias, fold_seed);
        scores = scores.add_column_offsets(&offsets)?;
    }
    let max_rank = if config.max_rank == 0 {
        gallery.len()
    } else {
        config.max_rank
    };
    let without = cmc_with(&scores, max_rank, exec)?;
    let normalized = minmax_normalize_with(&scores, config.normalization_axis, exec)?;
    let with = cmc_with(&normalized, max_rank, exec)?;
    Ok(FoldOutcome {
        fold: fold_idx,
        r: model.r(),
        train_ids: fold.train.len(),
        test_ids: fold.test.len(),
        probes: probes.len(),
        gallery: gallery.len(),
        without: without.ranks().to_vec(),
        with: with.ranks().to_vec(),
    })
}

/// Run the protocol on already-loaded views.
pub fn run_on_views(
    dataset: &str,
    probe_view: &FeatureSet,
    gallery_view: &FeatureSet,
    distractors: Option<&FeatureSet>,
    config: &ExperimentConfig,
    exec: Exec,
) -> Result<ExperimentReport> {
    let ids: Vec<Label> = shared_labels(probe_view, gallery_view).into_iter().collect();
    if ids.is_empty() {
        return Err(Error::NoSharedIdentities);
    }
    let plan = make_splits(&ids, config.k, config.seed)?;
    let mut folds = exec
        .map_range(plan.folds.len(), |f| {
            run_fold(f, &plan.folds[f], probe_view, gallery_view, distractors, config, exec)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    // whole-gallery curves can differ in length across folds
    let len = folds.iter().map(|f| f.without.len()).min().unwrap_or(0);
    for f in &mut folds {
        f.without.truncate(len);
        f.with.truncate(len);
    }
    let without = CmcResult::from_folds(folds.iter().map(|f| f.without.clone()).collect())?;
    let with = CmcResult::from_folds(folds.iter().map(|f| f.with.clone()).collect())?;
    Ok(ExperimentReport {
        dataset: dataset.to_owned(),
        config: config.clone(),
        probe_view: probe_view.view_id().to_owned(),
        gallery_view: gallery_view.view_id().to_owned(),
        distractors: distractors.map_or(0, FeatureSet::len),
        folds,
        without,
        with,
    })
}
