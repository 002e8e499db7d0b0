//! Probe × gallery scoring under a learned metric.
//!
//! Distances use the difference form `(u − v)ᵀ M (u − v)`. `M` is generally
//! indefinite, so scores can be negative; they are ranked as-is.
//!
//! The matrix path evaluates each pair as `(u − v)ᵀ (Mu − Mv)` after
//! projecting both sets once, which costs `O(r)` per pair instead of
//! `O(r²)`. Identical inputs give exactly zero and swapping the two
//! arguments gives exactly the same value.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::datamodel::{
    FeatureSet, Label, Normalization, NormalizationAxis, Polarity, ScoreMatrix, XqdaModel,
};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Default cap on the score block held in memory at once (1 GiB).
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 30;

/// `(u − v)ᵀ M (u − v)`.
pub fn mahalanobis_distance(m: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch {
            found: v.len(),
            expected: u.len(),
        });
    }
    if m.shape() != (u.len(), u.len()) {
        return Err(Error::DimMismatch {
            found: m.nrows(),
            expected: u.len(),
        });
    }
    let diff = u - v;
    Ok(diff.dot(&(m * &diff)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchOptions {
    pub exec: Exec,
    /// Bytes of scores materialized per block by [`score_row_blocks`].
    pub memory_budget: usize,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            exec: Exec::default(),
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

/// Projected vectors and their images under `M`, one column per sample.
struct Prepared {
    x: DMatrix<f64>,
    mx: DMatrix<f64>,
}

fn prepare(model: &XqdaModel, fs: &FeatureSet) -> Result<Prepared> {
    if fs.dim() != model.d() {
        return Err(Error::DimMismatch {
            found: fs.dim(),
            expected: model.d(),
        });
    }
    let x = model.w().tr_mul(fs.vectors());
    let mx = model.metric() * &x;
    Ok(Prepared { x, mx })
}

fn fill_row(p: &Prepared, i: usize, g: &Prepared, row: &mut [f64]) {
    let (pu, pmu) = (p.x.column(i), p.mx.column(i));
    for (j, out) in row.iter_mut().enumerate() {
        let (gv, gmv) = (g.x.column(j), g.mx.column(j));
        let mut acc = 0.0;
        for k in 0..pu.len() {
            acc += (pu[k] - gv[k]) * (pmu[k] - gmv[k]);
        }
        *out = acc;
    }
}

/// Stream the score matrix in row blocks no larger than the memory budget.
///
/// `sink(first_row, block)` receives `block` in row-major order with one row
/// per probe and `gallery.len()` entries per row.
pub fn score_row_blocks<F>(
    model: &XqdaModel,
    probes: &FeatureSet,
    gallery: &FeatureSet,
    opts: &MatchOptions,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(usize, &[f64]) -> Result<()>,
{
    let p = prepare(model, probes)?;
    let g = prepare(model, gallery)?;
    let (np, ng) = (probes.len(), gallery.len());
    if np == 0 || ng == 0 {
        return Ok(());
    }
    let rows_per_block = (opts.memory_budget / (8 * ng)).clamp(1, np);
    let mut block = vec![0.0; rows_per_block * ng];
    let mut start = 0;
    while start < np {
        let rows = rows_per_block.min(np - start);
        let buf = &mut block[..rows * ng];
        opts.exec
            .for_each_chunk_mut(buf, ng, |i, row| fill_row(&p, start + i, &g, row));
        sink(start, buf)?;
        start += rows;
    }
    Ok(())
}

/// Full `probes × gallery` distance matrix (smaller is better, unnormalized).
pub fn score_matrix(model: &XqdaModel, probes: &FeatureSet, gallery: &FeatureSet) -> Result<ScoreMatrix> {
    score_matrix_with(model, probes, gallery, &MatchOptions::default())
}

pub fn score_matrix_with(
    model: &XqdaModel,
    probes: &FeatureSet,
    gallery: &FeatureSet,
    opts: &MatchOptions,
) -> Result<ScoreMatrix> {
    let (np, ng) = (probes.len(), gallery.len());
    let mut row_major = vec![0.0; np * ng];
    let full = MatchOptions {
        memory_budget: usize::MAX,
        ..*opts
    };
    score_row_blocks(model, probes, gallery, &full, |start, block| {
        row_major[start * ng..start * ng + block.len()].copy_from_slice(block);
        Ok(())
    })?;
    ScoreMatrix::new(
        DMatrix::from_row_slice(np, ng, &row_major),
        probes.labels().to_vec(),
        gallery.labels().to_vec(),
        Polarity::SmallerIsBetter,
    )
}

/// Gallery indices of one score row ordered best first (ties by index).
pub fn ranked_gallery(row: &[f64], polarity: Polarity) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| {
        let ord = match polarity {
            Polarity::SmallerIsBetter => row[a].total_cmp(&row[b]),
            Polarity::LargerIsBetter => row[b].total_cmp(&row[a]),
        };
        ord.then(a.cmp(&b))
    });
    idx
}

pub fn write_scores_csv(scores: &ScoreMatrix, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "probe_label,gallery_label,value")?;
    for i in 0..scores.n_probes() {
        for j in 0..scores.n_gallery() {
            writeln!(
                out,
                "{},{},{:.16e}",
                scores.probe_labels()[i],
                scores.gallery_labels()[j],
                scores.values()[(i, j)]
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

pub const SCORES_MAGIC: &[u8; 4] = b"XSCR";
pub const SCORES_VERSION: u32 = 1;

fn normalization_code(n: Normalization) -> u8 {
    match n {
        Normalization::None => 0,
        Normalization::MinMax(NormalizationAxis::PerProbeRow) => 1,
        Normalization::MinMax(NormalizationAxis::PerGalleryColumn) => 2,
        Normalization::MinMax(NormalizationAxis::TwoSided) => 3,
    }
}

/// Binary dump: `"XSCR" | u32 version=1 | u32 probes | u32 gallery |
/// u8 polarity (0 smaller-better, 1 larger-better) | u8 normalization
/// (0 none, 1 row, 2 column, 3 two-sided) | u16 reserved | probe labels |
/// gallery labels | probes × gallery f64 row-major`, little-endian, each
/// label stored as `u16 length | bytes`.
pub fn scores_to_bytes(scores: &ScoreMatrix) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(SCORES_MAGIC);
    out.extend_from_slice(&SCORES_VERSION.to_le_bytes());
    out.extend_from_slice(&(scores.n_probes() as u32).to_le_bytes());
    out.extend_from_slice(&(scores.n_gallery() as u32).to_le_bytes());
    out.push(match scores.polarity() {
        Polarity::SmallerIsBetter => 0,
        Polarity::LargerIsBetter => 1,
    });
    out.push(normalization_code(scores.normalization()));
    out.extend_from_slice(&0u16.to_le_bytes());
    for l in scores.probe_labels().iter().chain(scores.gallery_labels()) {
        let b = l.as_str().as_bytes();
        out.extend_from_slice(&(b.len() as u16).to_le_bytes());
        out.extend_from_slice(b);
    }
    for i in 0..scores.n_probes() {
        for j in 0..scores.n_gallery() {
            out.extend_from_slice(&scores.values()[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn scores_from_bytes(bytes: &[u8]) -> Result<ScoreMatrix> {
    let bad = |pos: usize, message: &str| Error::Format {
        path: "<scores>".into(),
        location: format!("offset {pos}"),
        message: message.into(),
    };
    if bytes.len() < 20 || &bytes[..4] != SCORES_MAGIC {
        return Err(bad(0, "not an XSCR score file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    if u32_at(4) != SCORES_VERSION as usize {
        return Err(bad(4, "unsupported version"));
    }
    let (np, ng) = (u32_at(8), u32_at(12));
    let polarity = match bytes[16] {
        0 => Polarity::SmallerIsBetter,
        1 => Polarity::LargerIsBetter,
        _ => return Err(bad(16, "bad polarity")),
    };
    let normalization = match bytes[17] {
        0 => Normalization::None,
        1 => Normalization::MinMax(NormalizationAxis::PerProbeRow),
        2 => Normalization::MinMax(NormalizationAxis::PerGalleryColumn),
        3 => Normalization::MinMax(NormalizationAxis::TwoSided),
        _ => return Err(bad(17, "bad normalization code")),
    };
    let mut pos = 20;
    let mut labels = Vec::with_capacity(np + ng);
    for _ in 0..np + ng {
        let len = bytes
            .get(pos..pos + 2)
            .map(|b| u16::from_le_bytes(b.try_into().unwrap()) as usize)
            .ok_or_else(|| bad(pos, "truncated label"))?;
        pos += 2;
        let raw = bytes.get(pos..pos + len).ok_or_else(|| bad(pos, "truncated label"))?;
        let s = std::str::from_utf8(raw).map_err(|_| bad(pos, "label is not UTF-8"))?;
        labels.push(Label::new(s));
        pos += len;
    }
    let body = &bytes[pos..];
    if body.len() != 8 * np * ng {
        return Err(bad(pos, "score body length does not match header"));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let gallery = labels.split_off(np);
    ScoreMatrix::with_normalization(
        DMatrix::from_row_slice(np, ng, &values),
        labels,
        gallery,
        polarity,
        normalization,
    )
}

pub fn write_scores_binary(scores: &ScoreMatrix, path: &Path) -> Result<()> {
    fs::write(path, scores_to_bytes(scores))?;
    Ok(())
}
