use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datamodel::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<Label>,
    pub test: Vec<Label>,
}

/// `k` repeated random halvings of the identity set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub folds: Vec<Fold>,
    pub seed: u64,
    pub k: usize,
}

/// Shuffle the identities `k` times from one seeded stream and split each
/// shuffle into `⌊n/2⌋` training and `⌈n/2⌉` test identities.
///
/// The input order does not matter: labels are sorted and deduplicated first.
pub fn make_splits(labels: &[Label], k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::BadParams(format!("fold count k={k} must be at least 2")));
    }
    let mut ids = labels.to_vec();
    ids.sort();
    ids.dedup();
    let needed = k.max(2);
    if ids.len() < needed {
        return Err(Error::TooFewIdentities {
            found: ids.len(),
            needed,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = ids.len() / 2;
    let folds = (0..k)
        .map(|_| {
            let mut shuffled = ids.clone();
            shuffled.shuffle(&mut rng);
            let mut test = shuffled.split_off(half);
            shuffled.sort();
            test.sort();
            Fold {
                train: shuffled,
                test,
            }
        })
        .collect();
    Ok(SplitPlan { folds, seed, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn ids(n: usize) -> Vec<Label> {
        (0..n).map(|i| Label::new(format!("p{i}"))).collect()
    }

    #[test]
    fn four_labels_two_folds() {
        let plan = make_splits(&ids(4), 2, 0).unwrap();
        assert_eq!(plan.folds.len(), 2);
        for f in &plan.folds {
            assert_eq!((f.train.len(), f.test.len()), (2, 2));
            let tr: BTreeSet<_> = f.train.iter().collect();
            assert!(f.test.iter().all(|l| !tr.contains(l)));
        }
    }

    #[test]
    fn viper_sized_halves() {
        let plan = make_splits(&ids(632), 10, 3).unwrap();
        assert_eq!(plan.k, 10);
        assert!(plan.folds.iter().all(|f| f.train.len() == 316 && f.test.len() == 316));
        // fresh shuffle per fold
        assert_ne!(plan.folds[0], plan.folds[1]);
    }

    #[test]
    fn odd_count_differs_by_one() {
        let plan = make_splits(&ids(7), 3, 1).unwrap();
        assert!(plan.folds.iter().all(|f| f.train.len() == 3 && f.test.len() == 4));
    }

    #[test]
    fn deterministic_and_order_independent() {
        let mut rev = ids(20);
        rev.reverse();
        assert_eq!(make_splits(&ids(20), 5, 9).unwrap(), make_splits(&rev, 5, 9).unwrap());
    }

    #[test]
    fn errors() {
        assert!(matches!(make_splits(&ids(3), 5, 0), Err(Error::TooFewIdentities { .. })));
        assert!(matches!(make_splits(&ids(10), 1, 0), Err(Error::BadParams(_))));
    }
}
