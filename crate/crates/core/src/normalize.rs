//! Min-max score normalization, `N = (x − x_min) / (x_max − x_min)`.
//!
//! Row-wise normalization is a strictly increasing affine map on every
//! non-constant row, so it never changes a row's ordering and therefore
//! never changes a CMC curve. Column-wise normalization rescales each
//! gallery item's scores across probes; it can reorder rows and removes any
//! per-gallery additive offset exactly.
//!
//! Constant slices map to 0.5.

use nalgebra::DMatrix;

use crate::datamodel::{Normalization, NormalizationAxis, ScoreMatrix};
use crate::error::{Error, Result};
use crate::exec::Exec;

fn minmax_slice(xs: &mut [f64]) {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if hi == lo {
        xs.iter_mut().for_each(|x| *x = 0.5);
    } else {
        let span = hi - lo;
        xs.iter_mut().for_each(|x| *x = (*x - lo) / span);
    }
}

/// Normalize each column of a column-major buffer.
fn columns(values: &mut DMatrix<f64>, exec: Exec) {
    let n = values.nrows();
    if n == 0 {
        return;
    }
    exec.for_each_chunk_mut(values.as_mut_slice(), n, |_, col| minmax_slice(col));
}

fn rows(values: &mut DMatrix<f64>, exec: Exec) {
    let mut t = values.transpose();
    columns(&mut t, exec);
    *values = t.transpose();
}

pub fn minmax_normalize(scores: &ScoreMatrix, axis: NormalizationAxis) -> Result<ScoreMatrix> {
    minmax_normalize_with(scores, axis, Exec::default())
}

pub fn minmax_normalize_with(
    scores: &ScoreMatrix,
    axis: NormalizationAxis,
    exec: Exec,
) -> Result<ScoreMatrix> {
    if let Normalization::MinMax(prev) = scores.normalization() {
        return Err(Error::AlreadyNormalized(prev.as_str()));
    }
    let mut values = scores.values().clone();
    match axis {
        NormalizationAxis::PerProbeRow => rows(&mut values, exec),
        NormalizationAxis::PerGalleryColumn => columns(&mut values, exec),
        NormalizationAxis::TwoSided => {
            columns(&mut values, exec);
            rows(&mut values, exec);
        }
    }
    ScoreMatrix::with_normalization(
        values,
        scores.probe_labels().to_vec(),
        scores.gallery_labels().to_vec(),
        scores.polarity(),
        Normalization::MinMax(axis),
    )
}
