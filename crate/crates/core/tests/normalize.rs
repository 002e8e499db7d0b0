use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reid_core::matcher::ranked_gallery;
use reid_core::normalize::{minmax_normalize, minmax_normalize_with};
use reid_core::{Error, Exec, Label, Normalization, NormalizationAxis, Polarity, ScoreMatrix};

fn scores(values: DMatrix<f64>) -> ScoreMatrix {
    let p = (0..values.nrows()).map(|i| Label::new(format!("p{i}"))).collect();
    let g = (0..values.ncols()).map(|i| Label::new(format!("g{i}"))).collect();
    ScoreMatrix::new(values, p, g, Polarity::SmallerIsBetter).unwrap()
}

#[test]
fn columns_span_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = scores(DMatrix::from_fn(10, 20, |_, _| rng.random_range(-50.0..50.0)));
    let n = minmax_normalize(&s, NormalizationAxis::PerGalleryColumn).unwrap();
    assert_eq!(n.normalization(), Normalization::MinMax(NormalizationAxis::PerGalleryColumn));
    for col in n.values().column_iter() {
        assert_eq!(col.min(), 0.0);
        assert_eq!(col.max(), 1.0);
    }
}

#[test]
fn second_normalization_is_refused() {
    let s = scores(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    let n = minmax_normalize(&s, NormalizationAxis::PerProbeRow).unwrap();
    assert!(matches!(
        minmax_normalize(&n, NormalizationAxis::PerProbeRow),
        Err(Error::AlreadyNormalized(_))
    ));
}

#[test]
fn exec_modes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = scores(DMatrix::from_fn(40, 70, |_, _| rng.random()));
    for axis in [NormalizationAxis::PerProbeRow, NormalizationAxis::PerGalleryColumn, NormalizationAxis::TwoSided] {
        assert_eq!(
            minmax_normalize_with(&s, axis, Exec::Sequential).unwrap(),
            minmax_normalize_with(&s, axis, Exec::Parallel).unwrap()
        );
    }
}

proptest! {
    #[test]
    fn row_normalization_preserves_every_ranking(
        rows in 1usize..8,
        cols in 1usize..12,
        seed in any::<u64>(),
        scale in 1e-3f64..1e3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = scores(DMatrix::from_fn(rows, cols, |_, _| (rng.random_range(0..6) as f64) * scale));
        let n = minmax_normalize(&s, NormalizationAxis::PerProbeRow).unwrap();
        for i in 0..rows {
            let a: Vec<f64> = s.values().row(i).iter().copied().collect();
            let b: Vec<f64> = n.values().row(i).iter().copied().collect();
            prop_assert_eq!(ranked_gallery(&a, Polarity::SmallerIsBetter), ranked_gallery(&b, Polarity::SmallerIsBetter));
        }
    }

    #[test]
    fn outputs_stay_in_unit_interval(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = scores(DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1e6..1e6)));
        for axis in [NormalizationAxis::PerProbeRow, NormalizationAxis::PerGalleryColumn, NormalizationAxis::TwoSided] {
            let n = minmax_normalize(&s, axis).unwrap();
            prop_assert!(n.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
