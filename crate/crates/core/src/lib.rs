//! Cross-view metric learning for person re-identification.
//!
//! The pipeline works on precomputed feature vectors from two camera views:
//!
//! 1. [`ingest`] reads feature files and dataset manifests.
//! 2. [`xqda`] learns a projection `W` and metric `M` from intra-person and
//!    extra-person difference covariances.
//! 3. [`matcher`] scores probes against a gallery with `(u − v)ᵀ M (u − v)`
//!    in the learned subspace.
//! 4. [`normalize`] applies min-max score normalization.
//! 5. [`eval`] computes CMC curves over repeated identity splits.
//!
//! [`synth`] generates synthetic cross-view data and holds brute-force
//! reference implementations used by the test suites.
//!
//! The `parallel` feature (on by default) runs the data-parallel loops on
//! rayon; see [`exec`].

pub mod datamodel;
pub mod error;
pub mod eval;
pub mod exec;
pub mod ingest;
pub mod matcher;
pub mod normalize;
pub mod synth;
pub mod xqda;

pub use datamodel::{
    CmcResult, CovariancePair, DifferenceSets, FeatureSet, Label, Normalization,
    NormalizationAxis, Polarity, RPolicy, ScoreMatrix, TrainingRecord, XqdaModel,
};
pub use error::{Error, Result};
pub use exec::Exec;
