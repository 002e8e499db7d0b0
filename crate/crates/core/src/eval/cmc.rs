use crate::datamodel::{CmcResult, Polarity, ScoreMatrix};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Rank (1-based) of the best same-label gallery item for probe `i`.
///
/// Sorting the row with ties broken by gallery index puts the best match `b`
/// at position `1 + #{j : j sorts before b}`, so a linear count suffices.
fn probe_rank(scores: &ScoreMatrix, i: usize) -> Result<usize> {
    let v = scores.values();
    let label = &scores.probe_labels()[i];
    let before = |a: usize, b: usize| {
        let (x, y) = (v[(i, a)], v[(i, b)]);
        match scores.polarity() {
            Polarity::SmallerIsBetter => x < y || (x == y && a < b),
            Polarity::LargerIsBetter => x > y || (x == y && a < b),
        }
    };
    let mut best: Option<usize> = None;
    for (j, g) in scores.gallery_labels().iter().enumerate() {
        if g == label && best.is_none_or(|b| before(j, b)) {
            best = Some(j);
        }
    }
    let b = best.ok_or_else(|| Error::ProbeLabelAbsent(label.to_string()))?;
    Ok(1 + (0..scores.n_gallery()).filter(|&j| before(j, b)).count())
}

/// Cumulative matching characteristic for ranks `1..=max_rank`.
pub fn cmc(scores: &ScoreMatrix, max_rank: usize) -> Result<CmcResult> {
    cmc_with(scores, max_rank, Exec::default())
}

pub fn cmc_with(scores: &ScoreMatrix, max_rank: usize, exec: Exec) -> Result<CmcResult> {
    let g = scores.n_gallery();
    if max_rank == 0 || max_rank > g {
        return Err(Error::RankOutOfRange { max_rank, gallery: g });
    }
    if scores.n_probes() == 0 {
        return Err(Error::EmptyInput("CMC of zero probes"));
    }
    let ranks = exec
        .map_range(scores.n_probes(), |i| probe_rank(scores, i))
        .into_iter()
        .collect::<Result<Vec<usize>>>()?;
    let mut hits = vec![0usize; max_rank];
    for r in ranks {
        if r <= max_rank {
            hits[r - 1] += 1;
        }
    }
    let n = scores.n_probes() as f64;
    let mut acc = 0;
    let curve = hits
        .into_iter()
        .map(|h| {
            acc += h;
            acc as f64 / n
        })
        .collect();
    CmcResult::from_folds(vec![curve])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::Label;
    use nalgebra::DMatrix;

    fn sm(rows: usize, data: &[f64], probes: &[&str], gallery: &[&str], pol: Polarity) -> ScoreMatrix {
        ScoreMatrix::new(
            DMatrix::from_row_slice(rows, gallery.len(), data),
            probes.iter().map(|&s| Label::from(s)).collect(),
            gallery.iter().map(|&s| Label::from(s)).collect(),
            pol,
        )
        .unwrap()
    }

    #[test]
    fn single_probe_rank_one() {
        let s = sm(1, &[0.1, 0.9], &["a"], &["a", "b"], Polarity::SmallerIsBetter);
        assert_eq!(cmc(&s, 2).unwrap().ranks(), &[1.0, 1.0]);
        let s = sm(1, &[0.1, 0.9], &["a"], &["a", "b"], Polarity::LargerIsBetter);
        assert_eq!(cmc(&s, 2).unwrap().ranks(), &[0.0, 1.0]);
    }

    #[test]
    fn one_of_two_at_second_position() {
        let s = sm(2, &[0.1, 0.5, 0.2, 0.9], &["a", "b"], &["a", "b"], Polarity::SmallerIsBetter);
        assert_eq!(cmc(&s, 2).unwrap().ranks(), &[0.5, 1.0]);
    }

    #[test]
    fn ties_break_by_gallery_index() {
        let s = sm(1, &[0.3, 0.3], &["b"], &["a", "b"], Polarity::SmallerIsBetter);
        assert_eq!(cmc(&s, 2).unwrap().ranks(), &[0.0, 1.0]);
        let s = sm(1, &[0.3, 0.3], &["a"], &["a", "b"], Polarity::SmallerIsBetter);
        assert_eq!(cmc(&s, 2).unwrap().ranks(), &[1.0, 1.0]);
    }

    #[test]
    fn multi_shot_uses_best_match() {
        let s = sm(1, &[0.9, 0.2, 0.1], &["a"], &["a", "b", "a"], Polarity::SmallerIsBetter);
        assert_eq!(cmc(&s, 3).unwrap().ranks(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn errors() {
        let s = sm(1, &[0.1, 0.9], &["z"], &["a", "b"], Polarity::SmallerIsBetter);
        assert!(matches!(cmc(&s, 1), Err(Error::ProbeLabelAbsent(l)) if l == "z"));
        let s = sm(1, &[0.1, 0.9], &["a"], &["a", "b"], Polarity::SmallerIsBetter);
        assert!(matches!(cmc(&s, 3), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(cmc(&s, 0), Err(Error::RankOutOfRange { .. })));
    }
}
