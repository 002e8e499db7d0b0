//! Cross-view quadratic discriminant analysis.
//!
//! Training turns two labeled views into intra-person and extra-person
//! difference sets, estimates their covariances, and solves a generalized
//! symmetric eigenproblem between them through a Cholesky reduction. The
//! retained eigenvectors form the projection `W`; the metric is
//! `M = (Wᵀ Σ_s W)⁻¹ − (Wᵀ Σ_D W)⁻¹`.
//!
//! Two orientations are available (see [`XqdaOptions::invert_quotient`]).
//! The default keeps the largest eigenvalues of `Σ_s⁻¹ Σ_D`: directions in
//! which different people differ more than two views of the same person.
//! The other keeps the largest eigenvalues of `Σ_D⁻¹ Σ_s`; on data where
//! same-person differences are small it retains the least discriminative
//! directions, so it is opt-in.
//!
//! Difference columns are not mean-centered.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datamodel::{
    symmetrize, CovariancePair, DifferenceSets, FeatureSet, RPolicy, TrainingRecord, XqdaModel,
};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Collect every same-label cross-view difference and sample
/// `negatives_per_positive · n_s` distinct different-label differences.
///
/// Columns are ordered by (index in `view_a`, index in `view_b`). Negative
/// pairs are drawn uniformly without replacement with a seeded ChaCha8
/// stream; when fewer exist, all of them are used.
pub fn build_difference_sets(
    view_a: &FeatureSet,
    view_b: &FeatureSet,
    negatives_per_positive: usize,
    seed: u64,
) -> Result<DifferenceSets> {
    if view_a.dim() != view_b.dim() {
        return Err(Error::DimMismatch {
            found: view_b.dim(),
            expected: view_a.dim(),
        });
    }
    if negatives_per_positive == 0 {
        return Err(Error::BadParams("negatives_per_positive must be >= 1".into()));
    }
    for v in [view_a, view_b] {
        if v.distinct_labels().len() < 2 {
            return Err(Error::SingleIdentity(v.view_id().to_owned()));
        }
    }
    let a_labels = view_a.distinct_labels();
    if view_b.labels().iter().all(|l| !a_labels.contains(l)) {
        return Err(Error::NoSharedIdentities);
    }

    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (i, la) in view_a.labels().iter().enumerate() {
        for (j, lb) in view_b.labels().iter().enumerate() {
            if la == lb {
                positives.push((i, j));
            } else {
                negatives.push((i, j));
            }
        }
    }
    let wanted = negatives_per_positive.saturating_mul(positives.len());
    let chosen: Vec<(usize, usize)> = if wanted >= negatives.len() {
        negatives
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, negatives.len(), wanted).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|k| negatives[k]).collect()
    };

    let diff_matrix = |pairs: &[(usize, usize)]| {
        let (a, b) = (view_a.vectors(), view_b.vectors());
        DMatrix::from_fn(view_a.dim(), pairs.len(), |r, c| {
            let (i, j) = pairs[c];
            a[(r, i)] - b[(r, j)]
        })
    };
    DifferenceSets::new(diff_matrix(&positives), diff_matrix(&chosen), seed)
}

/// `(1/n) X Xᵀ` for a `d × n` matrix of column samples.
pub fn covariance(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    covariance_with(x, Exec::default())
}

/// [`covariance`] with an explicit execution strategy. Each output entry is
/// a single dot product summed in sample order, so both strategies agree
/// bit for bit.
pub fn covariance_with(x: &DMatrix<f64>, exec: Exec) -> Result<DMatrix<f64>> {
    let (d, n) = x.shape();
    if n == 0 {
        return Err(Error::EmptyInput("covariance of zero samples"));
    }
    // rows of X become contiguous columns of Xᵀ
    let xt = x.transpose();
    let inv_n = 1.0 / n as f64;
    let mut upper = vec![0.0; d * d];
    exec.for_each_chunk_mut(&mut upper, d, |i, row| {
        let xi = xt.column(i);
        for j in i..d {
            row[j] = xi.dot(&xt.column(j)) * inv_n;
        }
    });
    let c = DMatrix::from_fn(d, d, |i, j| {
        if i <= j {
            upper[i * d + j]
        } else {
            upper[j * d + i]
        }
    });
    Ok(symmetrize(&c))
}

/// Diagonal regularization added to both covariances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// `scale · (tr Σ_s + tr Σ_D) / (2d)`.
    Auto(f64),
    Fixed(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Auto(1e-3)
    }
}

impl std::fmt::Display for Ridge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ridge::Auto(s) => write!(f, "auto:{s}"),
            Ridge::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl std::str::FromStr for Ridge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid ridge `{s}` (use auto, auto:<scale> or a number)"));
        let s = s.trim();
        let check = |v: f64| if v >= 0.0 && v.is_finite() { Ok(v) } else { Err(bad()) };
        if s == "auto" {
            Ok(Ridge::default())
        } else if let Some(scale) = s.strip_prefix("auto:") {
            Ok(Ridge::Auto(check(scale.trim().parse().map_err(|_| bad())?)?))
        } else {
            Ok(Ridge::Fixed(check(s.parse().map_err(|_| bad())?)?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XqdaOptions {
    pub ridge: Ridge,
    pub r_policy: RPolicy,
    /// `true` (the default) solves `Σ_D w = λ Σ_s w`, keeping directions
    /// where extra-person variance exceeds intra-person variance. `false`
    /// solves `Σ_s w = λ Σ_D w`, i.e. the largest eigenvalues of `Σ_D⁻¹ Σ_s`.
    pub invert_quotient: bool,
    pub exec: Exec,
}

impl Default for XqdaOptions {
    fn default() -> Self {
        XqdaOptions {
            ridge: Ridge::default(),
            r_policy: RPolicy::default(),
            invert_quotient: true,
            exec: Exec::default(),
        }
    }
}

/// Solve `a w = λ b w` for symmetric `a` and symmetric positive definite `b`.
///
/// Returns all eigenpairs sorted by eigenvalue descending (ties: by the index
/// of each vector's largest-magnitude entry, ascending). Every eigenvector is
/// scaled to unit Euclidean norm with its largest-magnitude entry positive.
pub fn generalized_symmetric_eigen(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    b_name: &'static str,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = b.clone().cholesky().ok_or(Error::NotPositiveDefinite(b_name))?;
    let l = chol.l();
    let l_inv_a = l
        .solve_lower_triangular(a)
        .ok_or(Error::NotPositiveDefinite(b_name))?;
    let c = l
        .solve_lower_triangular(&l_inv_a.transpose())
        .ok_or(Error::NotPositiveDefinite(b_name))?;
    let eig = SymmetricEigen::try_new(symmetrize(&c), f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    let mut vecs = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or(Error::EigenFailure)?;

    let n = vecs.ncols();
    let mut pivots = Vec::with_capacity(n);
    for mut col in vecs.column_iter_mut() {
        let norm = col.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::EigenFailure);
        }
        col /= norm;
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        pivots.push(pivot);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .total_cmp(&eig.eigenvalues[i])
            .then(pivots[i].cmp(&pivots[j]))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    Ok((values, vecs.select_columns(&order)))
}

fn retained(eigenvalues: &[f64], policy: RPolicy) -> Result<usize> {
    match policy {
        RPolicy::Fixed(r) => {
            if r == 0 || r > eigenvalues.len() {
                return Err(Error::BadParams(format!(
                    "fixed r={r} outside 1..={}",
                    eigenvalues.len()
                )));
            }
            Ok(r)
        }
        RPolicy::EigenvalueThreshold(t) => {
            Ok(eigenvalues.iter().take_while(|&&l| l > t).count().max(1))
        }
    }
}

fn spd_inverse(m: DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    let m = symmetrize(&m);
    Ok(m.cholesky().ok_or(Error::NotPositiveDefinite(name))?.inverse())
}

/// Learn the projection and metric from a pair of difference sets.
pub fn solve_xqda(diffs: &DifferenceSets, opts: &XqdaOptions) -> Result<XqdaModel> {
    let d = diffs.dim();
    let mut sigma_s = covariance_with(diffs.xs(), opts.exec)?;
    let mut sigma_d = covariance_with(diffs.xd(), opts.exec)?;
    let ridge = match opts.ridge {
        Ridge::Fixed(v) => v,
        Ridge::Auto(scale) => scale * (sigma_s.trace() + sigma_d.trace()) / (2 * d) as f64,
    };
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::BadParams(format!("ridge {ridge} must be finite and >= 0")));
    }
    for i in 0..d {
        sigma_s[(i, i)] += ridge;
        sigma_d[(i, i)] += ridge;
    }

    let (values, vectors) = if opts.invert_quotient {
        generalized_symmetric_eigen(&sigma_d, &sigma_s, "sigma_s")?
    } else {
        generalized_symmetric_eigen(&sigma_s, &sigma_d, "sigma_d")?
    };
    let r = retained(&values, opts.r_policy)?;
    if values[r - 1] <= 0.0 {
        return Err(Error::EigenFailure);
    }
    let w = vectors.columns(0, r).into_owned();

    let projected_s = w.transpose() * &sigma_s * &w;
    let projected_d = w.transpose() * &sigma_d * &w;
    let metric = symmetrize(
        &(spd_inverse(projected_s, "projected sigma_s")?
            - spd_inverse(projected_d, "projected sigma_d")?),
    );

    let covariances = CovariancePair::new(sigma_s, sigma_d, ridge)?;
    XqdaModel::new(
        w,
        values[..r].to_vec(),
        metric,
        ridge,
        Some(TrainingRecord {
            covariances,
            r_policy: opts.r_policy,
            invert_quotient: opts.invert_quotient,
        }),
    )
}

/// Build difference sets from two views and train in one step.
pub fn train(
    view_a: &FeatureSet,
    view_b: &FeatureSet,
    negatives_per_positive: usize,
    seed: u64,
    opts: &XqdaOptions,
) -> Result<XqdaModel> {
    let diffs = build_difference_sets(view_a, view_b, negatives_per_positive, seed)?;
    solve_xqda(&diffs, opts)
}

/// Map every sample `x` to `Wᵀ x`; labels and view id are preserved.
pub fn project(model: &XqdaModel, fs: &FeatureSet) -> Result<FeatureSet> {
    if fs.dim() != model.d() {
        return Err(Error::DimMismatch {
            found: fs.dim(),
            expected: model.d(),
        });
    }
    let projected = model.w().tr_mul(fs.vectors());
    FeatureSet::new(fs.view_id(), projected, fs.labels().to_vec())
}

/// Labels present in both views.
pub fn shared_labels(a: &FeatureSet, b: &FeatureSet) -> BTreeSet<crate::datamodel::Label> {
    let la = a.distinct_labels();
    b.distinct_labels().into_iter().filter(|l| la.contains(l)).collect()
}

pub const MODEL_MAGIC: &[u8; 4] = b"XMDL";
pub const MODEL_VERSION: u32 = 1;

/// Serialize as `"XMDL" | u32 version | u32 d | u32 r | f64 ridge |
/// W (d·r f64, column-major) | eigenvalues (r f64) | M (r·r f64, column-major)`,
/// all little-endian. The training record is not stored.
pub fn model_to_bytes(model: &XqdaModel) -> Vec<u8> {
    let (d, r) = (model.d(), model.r());
    let mut out = Vec::with_capacity(24 + 8 * (d * r + r + r * r));
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(r as u32).to_le_bytes());
    out.extend_from_slice(&model.ridge().to_le_bytes());
    let floats = model
        .w()
        .iter()
        .chain(model.eigenvalues())
        .chain(model.metric().iter());
    for v in floats {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<XqdaModel> {
    let bad = |location: String, message: &str| Error::Format {
        path: "<model>".into(),
        location,
        message: message.into(),
    };
    if bytes.len() < 24 || &bytes[..4] != MODEL_MAGIC {
        return Err(bad("offset 0".into(), "not an XMDL model file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    if u32_at(4) != MODEL_VERSION as usize {
        return Err(bad("offset 4".into(), "unsupported model version"));
    }
    let (d, r) = (u32_at(8), u32_at(12));
    let ridge = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = 24 + 8 * (d * r + r + r * r);
    if bytes.len() != expected {
        return Err(bad(
            format!("offset {}", bytes.len().min(expected)),
            "model body length does not match header",
        ));
    }
    let floats: Vec<f64> = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let w = DMatrix::from_column_slice(d, r, &floats[..d * r]);
    let eigenvalues = floats[d * r..d * r + r].to_vec();
    let metric = DMatrix::from_column_slice(r, r, &floats[d * r + r..]);
    XqdaModel::new(w, eigenvalues, metric, ridge, None)
}

pub fn save_model(model: &XqdaModel, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<XqdaModel> {
    if !path.exists() {
        return Err(Error::FileMissing(path.to_path_buf()));
    }
    model_from_bytes(&fs::read(path)?).map_err(|e| match e {
        Error::Format {
            location, message, ..
        } => Error::Format {
            path: path.display().to_string(),
            location,
            message,
        },
        other => other,
    })
}
