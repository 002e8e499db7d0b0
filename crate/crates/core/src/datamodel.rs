//! Domain types shared by the whole pipeline.
//!
//! Feature matrices follow the column convention: a `d × m` matrix holds one
//! sample per column. All types validate their invariants on construction and
//! are immutable afterwards.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const DISTRACTOR_PREFIX: &str = "__distractor_";

/// Opaque identity label; equality is exact string match.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(String);

impl Label {
    pub fn new(s: impl Into<String>) -> Self {
        Label(s.into())
    }

    /// Label reserved for the `k`-th gallery-only distractor.
    pub fn distractor(k: usize) -> Self {
        Label(format!("{DISTRACTOR_PREFIX}{k}"))
    }

    pub fn is_distractor(&self) -> bool {
        self.0.starts_with(DISTRACTOR_PREFIX)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label(s.to_owned())
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label(s)
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Err(Error::NonFiniteValue { row: r, col: c });
            }
        }
    }
    Ok(())
}

/// Relative symmetry test used for covariance and metric matrices.
pub(crate) fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Labeled feature vectors captured by one camera view.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    view_id: String,
    vectors: DMatrix<f64>,
    labels: Vec<Label>,
}

impl FeatureSet {
    pub fn new(
        view_id: impl Into<String>,
        vectors: DMatrix<f64>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        if vectors.nrows() == 0 {
            return Err(Error::Validation("feature dimension must be at least 1".into()));
        }
        if vectors.ncols() != labels.len() {
            return Err(Error::Validation(format!(
                "vector count {} differs from label count {}",
                vectors.ncols(),
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|l| l.as_str().is_empty()) {
            return Err(Error::Validation(format!("label {i} is empty")));
        }
        check_finite(&vectors)?;
        Ok(FeatureSet {
            view_id: view_id.into(),
            vectors,
            labels,
        })
    }

    pub fn view_id(&self) -> &str {
        &self.view_id
    }

    pub fn with_view_id(mut self, view_id: impl Into<String>) -> Self {
        self.view_id = view_id.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }

    pub fn distinct_labels(&self) -> BTreeSet<Label> {
        self.labels.iter().cloned().collect()
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureSet {
        FeatureSet {
            view_id: self.view_id.clone(),
            vectors: self.vectors.select_columns(indices),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    /// Samples whose label satisfies `keep`.
    pub fn filter_labels(&self, keep: impl Fn(&Label) -> bool) -> FeatureSet {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.labels[i])).collect();
        self.subset(&idx)
    }

    /// Keep only the first sample of every identity.
    pub fn first_per_label(&self) -> FeatureSet {
        let mut seen = BTreeSet::new();
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| seen.insert(self.labels[i].clone()))
            .collect();
        self.subset(&idx)
    }

    /// Column-wise concatenation; `other` must share the dimension.
    pub fn concat(&self, other: &FeatureSet) -> Result<FeatureSet> {
        if other.dim() != self.dim() {
            return Err(Error::DimMismatch {
                found: other.dim(),
                expected: self.dim(),
            });
        }
        let mut vectors = DMatrix::zeros(self.dim(), self.len() + other.len());
        vectors.columns_mut(0, self.len()).copy_from(&self.vectors);
        vectors
            .columns_mut(self.len(), other.len())
            .copy_from(&other.vectors);
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        Ok(FeatureSet {
            view_id: self.view_id.clone(),
            vectors,
            labels,
        })
    }
}

/// Intra-person (`xs`) and extra-person (`xd`) cross-view difference columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceSets {
    xs: DMatrix<f64>,
    xd: DMatrix<f64>,
    sampling_seed: u64,
}

impl DifferenceSets {
    pub fn new(xs: DMatrix<f64>, xd: DMatrix<f64>, sampling_seed: u64) -> Result<Self> {
        if xs.ncols() == 0 || xd.ncols() == 0 {
            return Err(Error::Validation(
                "difference sets need at least one column each".into(),
            ));
        }
        if xs.nrows() == 0 || xs.nrows() != xd.nrows() {
            return Err(Error::DimMismatch {
                found: xd.nrows(),
                expected: xs.nrows(),
            });
        }
        check_finite(&xs)?;
        check_finite(&xd)?;
        Ok(DifferenceSets {
            xs,
            xd,
            sampling_seed,
        })
    }

    pub fn xs(&self) -> &DMatrix<f64> {
        &self.xs
    }

    pub fn xd(&self) -> &DMatrix<f64> {
        &self.xd
    }

    pub fn n_s(&self) -> usize {
        self.xs.ncols()
    }

    pub fn n_d(&self) -> usize {
        self.xd.ncols()
    }

    pub fn dim(&self) -> usize {
        self.xs.nrows()
    }

    pub fn sampling_seed(&self) -> u64 {
        self.sampling_seed
    }
}

/// Ridge-augmented intra/extra covariance matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    sigma_s: DMatrix<f64>,
    sigma_d: DMatrix<f64>,
    ridge: f64,
}

impl CovariancePair {
    /// `sigma_s` and `sigma_d` are stored as given; `ridge` records what was
    /// already added to their diagonals.
    pub fn new(sigma_s: DMatrix<f64>, sigma_d: DMatrix<f64>, ridge: f64) -> Result<Self> {
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::Validation(format!("ridge {ridge} must be finite and >= 0")));
        }
        if sigma_s.shape() != sigma_d.shape() || !sigma_s.is_square() {
            return Err(Error::Validation("covariances must be square and equal-sized".into()));
        }
        if !is_symmetric(&sigma_s, 1e-10) || !is_symmetric(&sigma_d, 1e-10) {
            return Err(Error::Validation("covariance matrix is not symmetric".into()));
        }
        if sigma_s.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("sigma_s"));
        }
        if sigma_d.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("sigma_d"));
        }
        Ok(CovariancePair {
            sigma_s,
            sigma_d,
            ridge,
        })
    }

    pub fn sigma_s(&self) -> &DMatrix<f64> {
        &self.sigma_s
    }

    pub fn sigma_d(&self) -> &DMatrix<f64> {
        &self.sigma_d
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }
}

/// How many generalized eigenvectors to retain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RPolicy {
    /// Keep the top `r`.
    Fixed(usize),
    /// Keep every eigenvalue strictly above the threshold, at least one.
    EigenvalueThreshold(f64),
}

impl Default for RPolicy {
    fn default() -> Self {
        RPolicy::EigenvalueThreshold(1.0)
    }
}

impl fmt::Display for RPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RPolicy::Fixed(r) => write!(f, "fixed:{r}"),
            RPolicy::EigenvalueThreshold(t) => write!(f, "threshold:{t}"),
        }
    }
}

impl std::str::FromStr for RPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid r_policy `{s}` (use fixed:<r> or threshold:<t>)"));
        let (kind, arg) = s.trim().split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "fixed" => {
                let r: usize = arg.trim().parse().map_err(|_| bad())?;
                if r == 0 {
                    return Err(bad());
                }
                Ok(RPolicy::Fixed(r))
            }
            "threshold" => {
                let t: f64 = arg.trim().parse().map_err(|_| bad())?;
                if !t.is_finite() {
                    return Err(bad());
                }
                Ok(RPolicy::EigenvalueThreshold(t))
            }
            _ => Err(bad()),
        }
    }
}

/// How a trained model came to be; absent for models read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    pub covariances: CovariancePair,
    pub r_policy: RPolicy,
    pub invert_quotient: bool,
}

/// Learned projection `w` (`d × r`) and metric `metric` (`r × r`).
#[derive(Debug, Clone, PartialEq)]
pub struct XqdaModel {
    w: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    metric: DMatrix<f64>,
    ridge: f64,
    training: Option<TrainingRecord>,
}

impl XqdaModel {
    pub fn new(
        w: DMatrix<f64>,
        eigenvalues: Vec<f64>,
        metric: DMatrix<f64>,
        ridge: f64,
        training: Option<TrainingRecord>,
    ) -> Result<Self> {
        let (d, r) = w.shape();
        if r == 0 || d == 0 || r > d {
            return Err(Error::Validation(format!("need 1 <= r <= d, got r={r}, d={d}")));
        }
        if eigenvalues.len() != r {
            return Err(Error::Validation(format!(
                "{} eigenvalues for r={r}",
                eigenvalues.len()
            )));
        }
        if eigenvalues.windows(2).any(|p| p[0] < p[1]) {
            return Err(Error::Validation("eigenvalues must be descending".into()));
        }
        if metric.shape() != (r, r) {
            return Err(Error::Validation(format!(
                "metric is {:?}, expected ({r}, {r})",
                metric.shape()
            )));
        }
        if !is_symmetric(&metric, 1e-10) {
            return Err(Error::Validation("metric is not symmetric".into()));
        }
        check_finite(&w)?;
        check_finite(&metric)?;
        if let Some(t) = &training {
            if t.covariances.sigma_s().nrows() != d {
                return Err(Error::DimMismatch {
                    found: t.covariances.sigma_s().nrows(),
                    expected: d,
                });
            }
        }
        Ok(XqdaModel {
            w,
            eigenvalues,
            metric,
            ridge,
            training,
        })
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn training(&self) -> Option<&TrainingRecord> {
        self.training.as_ref()
    }

    /// Input feature dimension.
    pub fn d(&self) -> usize {
        self.w.nrows()
    }

    /// Retained subspace dimension.
    pub fn r(&self) -> usize {
        self.w.ncols()
    }
}

/// Whether smaller or larger scores indicate a better match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    SmallerIsBetter,
    LargerIsBetter,
}

/// Axis along which min-max normalization is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NormalizationAxis {
    PerProbeRow,
    #[default]
    PerGalleryColumn,
    /// Columns first, then rows.
    TwoSided,
}

impl NormalizationAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            NormalizationAxis::PerProbeRow => "per_probe_row",
            NormalizationAxis::PerGalleryColumn => "per_gallery_column",
            NormalizationAxis::TwoSided => "two_sided",
        }
    }
}

impl fmt::Display for NormalizationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NormalizationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "per_probe_row" | "row" => Ok(NormalizationAxis::PerProbeRow),
            "per_gallery_column" | "column" => Ok(NormalizationAxis::PerGalleryColumn),
            "two_sided" => Ok(NormalizationAxis::TwoSided),
            other => Err(Error::Config(format!("unknown normalization axis `{other}`"))),
        }
    }
}

/// Normalization provenance of a [`ScoreMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    None,
    MinMax(NormalizationAxis),
}

/// Probe × gallery scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    values: DMatrix<f64>,
    probe_labels: Vec<Label>,
    gallery_labels: Vec<Label>,
    polarity: Polarity,
    normalization: Normalization,
}

impl ScoreMatrix {
    pub fn new(
        values: DMatrix<f64>,
        probe_labels: Vec<Label>,
        gallery_labels: Vec<Label>,
        polarity: Polarity,
    ) -> Result<Self> {
        Self::with_normalization(values, probe_labels, gallery_labels, polarity, Normalization::None)
    }

    pub fn with_normalization(
        values: DMatrix<f64>,
        probe_labels: Vec<Label>,
        gallery_labels: Vec<Label>,
        polarity: Polarity,
        normalization: Normalization,
    ) -> Result<Self> {
        if values.nrows() != probe_labels.len() || values.ncols() != gallery_labels.len() {
            return Err(Error::Validation(format!(
                "score matrix is {:?} but there are {} probe and {} gallery labels",
                values.shape(),
                probe_labels.len(),
                gallery_labels.len()
            )));
        }
        check_finite(&values)?;
        Ok(ScoreMatrix {
            values,
            probe_labels,
            gallery_labels,
            polarity,
            normalization,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn probe_labels(&self) -> &[Label] {
        &self.probe_labels
    }

    pub fn gallery_labels(&self) -> &[Label] {
        &self.gallery_labels
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn n_probes(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_gallery(&self) -> usize {
        self.values.ncols()
    }

    /// Add `offsets[j]` to every score in gallery column `j`.
    pub fn add_column_offsets(&self, offsets: &[f64]) -> Result<ScoreMatrix> {
        if offsets.len() != self.n_gallery() {
            return Err(Error::DimMismatch {
                found: offsets.len(),
                expected: self.n_gallery(),
            });
        }
        let mut values = self.values.clone();
        for (j, mut col) in values.column_iter_mut().enumerate() {
            col.add_scalar_mut(offsets[j]);
        }
        ScoreMatrix::with_normalization(
            values,
            self.probe_labels.clone(),
            self.gallery_labels.clone(),
            self.polarity,
            self.normalization,
        )
    }
}

/// Cumulative matching rates at ranks `1..=R`, possibly aggregated over folds.
#[derive(Debug, Clone, PartialEq)]
pub struct CmcResult {
    ranks: Vec<f64>,
    std: Vec<f64>,
    folds: Vec<Vec<f64>>,
}

impl CmcResult {
    /// Aggregate per-fold curves (all of equal length) into mean and sample
    /// standard deviation per rank.
    pub fn from_folds(folds: Vec<Vec<f64>>) -> Result<Self> {
        let len = folds.first().map(Vec::len).unwrap_or(0);
        if len == 0 {
            return Err(Error::Validation("CMC needs at least one fold and one rank".into()));
        }
        for f in &folds {
            if f.len() != len {
                return Err(Error::Validation("CMC folds differ in length".into()));
            }
            if f.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::Validation("CMC rate outside [0, 1]".into()));
            }
            if f.windows(2).any(|p| p[0] > p[1]) {
                return Err(Error::Validation("CMC curve is not monotone".into()));
            }
        }
        let k = folds.len() as f64;
        let ranks: Vec<f64> = (0..len)
            .map(|r| folds.iter().map(|f| f[r]).sum::<f64>() / k)
            .collect();
        let std = (0..len)
            .map(|r| {
                if folds.len() < 2 {
                    0.0
                } else {
                    let ss: f64 = folds.iter().map(|f| (f[r] - ranks[r]).powi(2)).sum();
                    (ss / (k - 1.0)).sqrt()
                }
            })
            .collect();
        Ok(CmcResult { ranks, std, folds })
    }

    /// Mean matching rate per rank; index 0 is rank 1.
    pub fn ranks(&self) -> &[f64] {
        &self.ranks
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn folds(&self) -> &[Vec<f64>] {
        &self.folds
    }

    pub fn max_rank(&self) -> usize {
        self.ranks.len()
    }

    /// Mean rate at 1-based `rank`, if within the curve.
    pub fn rate_at(&self, rank: usize) -> Option<f64> {
        rank.checked_sub(1).and_then(|i| self.ranks.get(i)).copied()
    }
}
