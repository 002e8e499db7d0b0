//! Synthetic cross-view data with known ground truth, plus brute-force
//! reference implementations ("oracles") used to check the production paths.
//!
//! Each identity gets a latent center `c ~ N(0, spread² I)`. Camera A sees
//! `c + noise`, camera B sees `R c + noise` where `R` is a fixed orthogonal
//! transform that rotates a random subspace and leaves its complement alone
//! (see [`view_transform`]). Same-person differences therefore vanish outside
//! the rotated subspace, which a difference-covariance metric can exploit;
//! a rotation of the whole space could not be undone that way. The oracles
//! below are deliberately plain loops and share no code with `matcher`,
//! `xqda` or `eval`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::datamodel::{FeatureSet, Label, Polarity, ScoreMatrix, XqdaModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n_ids: usize,
    pub dim: usize,
    pub images_per_view: usize,
    pub view_noise: f64,
    pub identity_spread: f64,
    /// Magnitude of the per-gallery-sample score offset returned in
    /// [`SyntheticPair::gallery_bias`]; the features themselves are unaffected.
    pub column_bias: f64,
    /// Dimension of the subspace the camera-B transform rotates; 0 means
    /// `max(2, dim / 4)`.
    pub rotated_dims: usize,
    /// Gallery-only vectors from fresh identities seen through camera B.
    pub distractors: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_ids: 100,
            dim: 16,
            images_per_view: 1,
            view_noise: 0.3,
            identity_spread: 1.0,
            column_bias: 0.0,
            rotated_dims: 0,
            distractors: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub view_a: FeatureSet,
    pub view_b: FeatureSet,
    /// One additive score offset per `view_b` sample.
    pub gallery_bias: Vec<f64>,
    pub distractors: Option<FeatureSet>,
    /// The orthogonal camera-B transform.
    pub transform: DMatrix<f64>,
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Seeded random orthogonal matrix, made unique by forcing a positive
/// diagonal on the triangular factor.
pub fn random_orthogonal(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_orthogonal_from(&mut rng, dim)
}

fn random_orthogonal_from(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthogonal camera transform `R = I + U (Q − I) Uᵀ`: a random rotation `Q`
/// (determinant +1) acting on a random `rotated`-dimensional subspace spanned by the columns
/// of `U`, identity on its complement.
pub fn view_transform(dim: usize, rotated: usize, seed: u64) -> DMatrix<f64> {
    let rotated = rotated.min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = random_orthogonal_from(&mut rng, dim).columns(0, rotated).into_owned();
    let mut q = random_orthogonal_from(&mut rng, rotated);
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    let inner = q - DMatrix::identity(rotated, rotated);
    DMatrix::identity(dim, dim) + &basis * inner * basis.transpose()
}

/// `magnitude · U(0, 1)` offsets, one per gallery item.
pub fn column_bias_offsets(count: usize, magnitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB1A5_C01D_u64);
    (0..count).map(|_| magnitude * rng.random::<f64>()).collect()
}

pub fn identity_label(k: usize) -> Label {
    Label::new(format!("id{k:05}"))
}

pub fn gen_cross_view(p: &SynthParams) -> Result<SyntheticPair> {
    if p.n_ids < 2 || p.dim < 2 || p.images_per_view < 1 {
        return Err(Error::BadParams(format!(
            "need n_ids >= 2, dim >= 2, images_per_view >= 1 (got {}, {}, {})",
            p.n_ids, p.dim, p.images_per_view
        )));
    }
    for (name, v) in [
        ("view_noise", p.view_noise),
        ("identity_spread", p.identity_spread),
        ("column_bias", p.column_bias),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::BadParams(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let rotated = if p.rotated_dims == 0 {
        (p.dim / 4).max(2)
    } else {
        p.rotated_dims
    };
    let transform = view_transform(p.dim, rotated, p.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed.wrapping_add(1));
    let centers: Vec<DVector<f64>> = (0..p.n_ids)
        .map(|_| gaussian_vec(&mut rng, p.dim, p.identity_spread))
        .collect();

    let m = p.n_ids * p.images_per_view;
    let labels: Vec<Label> = (0..p.n_ids)
        .flat_map(|k| std::iter::repeat_n(identity_label(k), p.images_per_view))
        .collect();
    let mut a = DMatrix::zeros(p.dim, m);
    for (col, c) in centers.iter().flat_map(|c| std::iter::repeat_n(c, p.images_per_view)).enumerate() {
        a.set_column(col, &(c + gaussian_vec(&mut rng, p.dim, p.view_noise)));
    }
    let mut b = DMatrix::zeros(p.dim, m);
    for (col, c) in centers.iter().flat_map(|c| std::iter::repeat_n(c, p.images_per_view)).enumerate() {
        b.set_column(col, &(&transform * c + gaussian_vec(&mut rng, p.dim, p.view_noise)));
    }

    let distractors = if p.distractors > 0 {
        let mut d = DMatrix::zeros(p.dim, p.distractors);
        for k in 0..p.distractors {
            let c = gaussian_vec(&mut rng, p.dim, p.identity_spread);
            d.set_column(k, &(&transform * c + gaussian_vec(&mut rng, p.dim, p.view_noise)));
        }
        Some(FeatureSet::new(
            "distractor",
            d,
            (0..p.distractors).map(Label::distractor).collect(),
        )?)
    } else {
        None
    };

    Ok(SyntheticPair {
        view_a: FeatureSet::new("a", a, labels.clone())?,
        view_b: FeatureSet::new("b", b, labels)?,
        gallery_bias: column_bias_offsets(m, p.column_bias, p.seed),
        distractors,
        transform,
    })
}

/// Reference for `matcher::score_matrix`: project and evaluate every pair
/// with explicit loops.
pub fn oracle_pairwise_scores(
    model: &XqdaModel,
    probes: &FeatureSet,
    gallery: &FeatureSet,
) -> Result<ScoreMatrix> {
    let (d, r) = (model.d(), model.r());
    for fs in [probes, gallery] {
        if fs.dim() != d {
            return Err(Error::DimMismatch {
                found: fs.dim(),
                expected: d,
            });
        }
    }
    let w = model.w();
    let m = model.metric();
    let project = |fs: &FeatureSet, i: usize| -> Vec<f64> {
        let x = fs.vectors();
        let mut out = vec![0.0; r];
        for (c, o) in out.iter_mut().enumerate() {
            for k in 0..d {
                *o += w[(k, c)] * x[(k, i)];
            }
        }
        out
    };
    let pp: Vec<Vec<f64>> = (0..probes.len()).map(|i| project(probes, i)).collect();
    let gp: Vec<Vec<f64>> = (0..gallery.len()).map(|j| project(gallery, j)).collect();
    let mut values = DMatrix::zeros(probes.len(), gallery.len());
    for i in 0..probes.len() {
        for j in 0..gallery.len() {
            let diff: Vec<f64> = (0..r).map(|k| pp[i][k] - gp[j][k]).collect();
            let mut s = 0.0;
            for a in 0..r {
                for b in 0..r {
                    s += diff[a] * m[(a, b)] * diff[b];
                }
            }
            values[(i, j)] = s;
        }
    }
    ScoreMatrix::new(
        values,
        probes.labels().to_vec(),
        gallery.labels().to_vec(),
        Polarity::SmallerIsBetter,
    )
}

/// `max_i ‖A w_i − λ_i B w_i‖ / ‖A w_i‖` over retained eigenpairs, with
/// `(A, B) = (Σ_s, Σ_D)` (swapped for inverted-quotient models). `None`
/// for models without a training record.
pub fn oracle_eigen_residual(model: &XqdaModel) -> Option<f64> {
    let t = model.training()?;
    let (a, b) = if t.invert_quotient {
        (t.covariances.sigma_d(), t.covariances.sigma_s())
    } else {
        (t.covariances.sigma_s(), t.covariances.sigma_d())
    };
    let d = model.d();
    let w = model.w();
    let mut worst = 0.0f64;
    for (i, &lambda) in model.eigenvalues().iter().enumerate() {
        let mut num = 0.0;
        let mut den = 0.0;
        for row in 0..d {
            let mut aw = 0.0;
            let mut bw = 0.0;
            for k in 0..d {
                aw += a[(row, k)] * w[(k, i)];
                bw += b[(row, k)] * w[(k, i)];
            }
            num += (aw - lambda * bw).powi(2);
            den += aw * aw;
        }
        worst = worst.max((num / den).sqrt());
    }
    Some(worst)
}

/// Reference CMC: fully sort every row (ties by gallery index), scan for
/// the first same-label item, and count.
pub fn oracle_cmc(scores: &ScoreMatrix, max_rank: usize) -> Vec<f64> {
    let (np, ng) = (scores.n_probes(), scores.n_gallery());
    let v = scores.values();
    let mut hits = vec![0usize; max_rank];
    for i in 0..np {
        let mut order: Vec<usize> = (0..ng).collect();
        order.sort_by(|&a, &b| {
            let o = v[(i, a)].partial_cmp(&v[(i, b)]).unwrap();
            let o = match scores.polarity() {
                Polarity::SmallerIsBetter => o,
                Polarity::LargerIsBetter => o.reverse(),
            };
            o.then(a.cmp(&b))
        });
        let pos = order
            .iter()
            .position(|&j| scores.gallery_labels()[j] == scores.probe_labels()[i])
            .expect("probe label missing from gallery");
        for h in hits.iter_mut().skip(pos) {
            *h += 1;
        }
    }
    hits.iter().map(|&h| h as f64 / np as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_transform() {
        let q = random_orthogonal(6, 3);
        let e = (q.transpose() * &q - DMatrix::identity(6, 6)).amax();
        assert!(e < 1e-12);
        assert_eq!(q, random_orthogonal(6, 3));
    }

    #[test]
    fn view_transform_fixes_complement() {
        let r = view_transform(8, 2, 5);
        assert!((r.transpose() * &r - DMatrix::identity(8, 8)).amax() < 1e-12);
        // exactly 6 unit eigenvalues: trace = 6 + 2cos θ
        let fixed = (&r - DMatrix::identity(8, 8)).svd(false, false);
        let zero = fixed.singular_values.iter().filter(|&&s| s < 1e-10).count();
        assert_eq!(zero, 6);
    }

    #[test]
    fn deterministic_per_seed() {
        let p = SynthParams {
            n_ids: 2,
            dim: 2,
            seed: 11,
            ..Default::default()
        };
        let x = gen_cross_view(&p).unwrap();
        let y = gen_cross_view(&p).unwrap();
        assert_eq!(x.view_a, y.view_a);
        assert_eq!(x.view_b, y.view_b);
        let z = gen_cross_view(&SynthParams { seed: 12, ..p }).unwrap();
        assert_ne!(x.view_a, z.view_a);
    }

    #[test]
    fn zero_noise_gallery_is_rotated_center() {
        let p = SynthParams {
            n_ids: 3,
            dim: 4,
            images_per_view: 2,
            view_noise: 0.0,
            ..Default::default()
        };
        let s = gen_cross_view(&p).unwrap();
        assert_eq!(s.view_a.len(), 6);
        assert_eq!(s.view_a.labels()[1], identity_label(0));
        for i in 0..6 {
            let expect = &s.transform * s.view_a.column(i);
            assert!((expect - s.view_b.column(i)).amax() < 1e-12);
        }
        assert_eq!(s.view_b.column(0), s.view_b.column(1));
    }

    #[test]
    fn bad_params() {
        let p = SynthParams {
            n_ids: 1,
            ..Default::default()
        };
        assert!(matches!(gen_cross_view(&p), Err(Error::BadParams(_))));
        let p = SynthParams {
            view_noise: -1.0,
            ..Default::default()
        };
        assert!(matches!(gen_cross_view(&p), Err(Error::BadParams(_))));
    }

    #[test]
    fn bias_offsets_in_range() {
        let b = column_bias_offsets(50, 3.0, 1);
        assert!(b.iter().all(|&x| (0.0..3.0).contains(&x)));
        assert!(column_bias_offsets(5, 0.0, 1).iter().all(|&x| x == 0.0));
    }
}
