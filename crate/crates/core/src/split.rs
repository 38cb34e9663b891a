//! Reproducible random partitions into a training and a testing part.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// One partition of `0..n_total`; both index lists are sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitPlan {
    pub fn n_total(&self) -> usize {
        self.train_indices.len() + self.test_indices.len()
    }
}

/// Group row indices by label value; groups ordered by label.
fn strata(labels: &[f64]) -> Result<Vec<Vec<usize>>> {
    if labels.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("stratum labels must be finite"));
    }
    let mut keys: Vec<f64> = labels.to_vec();
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    let mut groups: Vec<Vec<usize>> = alloc::vec![Vec::new(); keys.len()];
    for (i, v) in labels.iter().enumerate() {
        let k = keys.binary_search_by(|p| p.total_cmp(v)).unwrap();
        groups[k].push(i);
    }
    Ok(groups)
}

/// Split `total` units across groups proportionally to their sizes by the
/// largest-remainder rule; ties go to the earlier group.
fn allocate(total: usize, sizes: &[usize]) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let quotas: Vec<f64> = sizes.iter().map(|&s| total as f64 * s as f64 / n as f64).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = total - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if alloc[k] < sizes[k] {
            alloc[k] += 1;
            left -= 1;
        }
    }
    alloc
}

/// Random partition with `round(fraction · n_total)` training rows.
///
/// With `strata_labels` the training fraction is applied within each label
/// group (intended for binary outcomes); every group needs at least two rows.
pub fn make_split_plan(n_total: usize, fraction: f64, strata_labels: Option<&[f64]>, seed: u64) -> Result<SplitPlan> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::arg(format!("training fraction {fraction} outside (0, 1)")));
    }
    if n_total < 4 {
        return Err(Error::arg(format!("need at least 4 observations to split, got {n_total}")));
    }
    let n_train = (fraction * n_total as f64).round() as usize;
    if n_train == 0 || n_train == n_total {
        return Err(Error::arg(format!("fraction {fraction} leaves an empty half for n = {n_total}")));
    }
    let groups = match strata_labels {
        Some(labels) => {
            if labels.len() != n_total {
                return Err(Error::dim(format!("{} stratum labels for {} observations", labels.len(), n_total)));
            }
            let g = strata(labels)?;
            if let Some(small) = g.iter().find(|g| g.len() < 2) {
                return Err(Error::arg(format!("stratum with {} member(s) cannot be split", small.len())));
            }
            g
        }
        None => alloc::vec![(0..n_total).collect()],
    };
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let quota = allocate(n_train, &sizes);

    let mut rng = rng_from_seed(seed);
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n_total - n_train);
    for (mut members, k) in groups.into_iter().zip(quota) {
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan { train_indices: train, test_indices: test, fraction, seed, stratified: strata_labels.is_some() })
}

/// Seed of split `index` under `master_seed`.
pub fn split_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, stream::SPLIT, index as u64)
}

/// `m` independent plans with seeds derived from `(master_seed, split index)`.
pub fn repeated_splits(
    n_total: usize,
    fraction: f64,
    m: usize,
    strata_labels: Option<&[f64]>,
    master_seed: u64,
) -> Result<Vec<SplitPlan>> {
    if m == 0 {
        return Err(Error::arg("number of splits must be at least 1"));
    }
    (0..m).map(|s| make_split_plan(n_total, fraction, strata_labels, split_seed(master_seed, s))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn is_partition(p: &SplitPlan, n: usize) -> bool {
        let mut all: Vec<usize> = p.train_indices.iter().chain(&p.test_indices).copied().collect();
        all.sort_unstable();
        all == (0..n).collect::<Vec<_>>()
    }

    #[test]
    fn ten_split_in_half() {
        let p = make_split_plan(10, 0.5, None, 3).unwrap();
        assert_eq!((p.train_indices.len(), p.test_indices.len()), (5, 5));
        assert!(is_partition(&p, 10));
    }

    #[test]
    fn uneven_sizes() {
        let p = make_split_plan(1409, 409.0 / 1409.0, None, 1).unwrap();
        assert_eq!((p.train_indices.len(), p.test_indices.len()), (409, 1000));
    }

    #[test]
    fn stratified_keeps_class_balance() {
        let labels: Vec<f64> = (0..100).map(|i| if i < 30 { 1.0 } else { 0.0 }).collect();
        let p = make_split_plan(100, 0.5, Some(&labels), 8).unwrap();
        let cases = p.train_indices.iter().filter(|&&i| labels[i] == 1.0).count();
        assert_eq!(cases, 15);
        assert_eq!(p.train_indices.len(), 50);
        assert!(p.stratified);
    }

    #[test]
    fn stratified_total_is_rounded_fraction() {
        // groups of 7 and 6, round(6.5) = 7 training rows: quotas 3.77 and 3.23
        let labels: Vec<f64> = (0..13).map(|i| if i < 7 { 1.0 } else { 0.0 }).collect();
        let p = make_split_plan(13, 0.5, Some(&labels), 2).unwrap();
        assert_eq!(p.train_indices.len(), 7);
    }

    #[test]
    fn tiny_stratum_rejected() {
        let mut labels = alloc::vec![0.0; 10];
        labels[4] = 1.0;
        assert!(make_split_plan(10, 0.5, Some(&labels), 1).is_err());
    }

    #[test]
    fn bad_arguments() {
        assert!(make_split_plan(3, 0.5, None, 1).is_err());
        assert!(make_split_plan(10, 1.0, None, 1).is_err());
        assert!(make_split_plan(10, 0.01, None, 1).is_err());
        assert!(repeated_splits(10, 0.5, 0, None, 1).is_err());
    }

    #[test]
    fn single_repeated_split_matches_direct_plan() {
        let r = repeated_splits(40, 0.5, 1, None, 77).unwrap();
        assert_eq!(r[0], make_split_plan(40, 0.5, None, split_seed(77, 0)).unwrap());
    }

    #[test]
    fn repeated_plans_are_distinct() {
        let r = repeated_splits(200, 0.5, 10, None, 5).unwrap();
        for a in 0..10 {
            for b in a + 1..10 {
                assert_ne!(r[a].train_indices, r[b].train_indices);
            }
        }
    }

    #[test]
    fn master_seeds_do_not_collide() {
        let mut seen = std::collections::HashSet::new();
        for master in 0..100u64 {
            let plans = repeated_splits(60, 0.5, 3, None, master).unwrap();
            let key: Vec<Vec<usize>> = plans.into_iter().map(|p| p.train_indices).collect();
            assert!(seen.insert(key));
        }
    }

    proptest! {
        #[test]
        fn partition_and_determinism(n in 4usize..300, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let k = (frac * n as f64).round() as usize;
            prop_assume!(k > 0 && k < n);
            let a = make_split_plan(n, frac, None, seed).unwrap();
            prop_assert!(is_partition(&a, n));
            prop_assert_eq!(a.train_indices.len(), k);
            prop_assert_eq!(&a, &make_split_plan(n, frac, None, seed).unwrap());
        }

        #[test]
        fn stratified_partition(n in 8usize..200, frac in 0.2f64..0.8, seed in any::<u64>(), cut in 2usize..6) {
            let labels: Vec<f64> = (0..n).map(|i| if i % cut == 0 { 1.0 } else { 0.0 }).collect();
            let k = (frac * n as f64).round() as usize;
            prop_assume!(k > 0 && k < n && labels.iter().filter(|&&v| v == 1.0).count() >= 2);
            let a = make_split_plan(n, frac, Some(&labels), seed).unwrap();
            prop_assert!(is_partition(&a, n));
            prop_assert_eq!(a.train_indices.len(), k);
        }
    }
}
