use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::derive_seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionScheme {
    pub n_splits: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub splits: Vec<Split>,
}

/// Ten 80/20 stratified splits.
pub fn stratified_partitions<L: Ord + Copy>(labels: &[L], seed: u64) -> Result<PartitionScheme> {
    stratified_partitions_with(labels, 10, 0.8, seed)
}

pub fn stratified_partitions_with<L: Ord + Copy>(
    labels: &[L],
    n_splits: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<PartitionScheme> {
    if n_splits == 0 {
        return Err(Error::invalid("n_splits must be positive"));
    }
    let splits = (0..n_splits)
        .map(|k| split_once(labels, 1.0 - train_fraction, derive_seed(seed, k as u64)))
        .collect::<Result<_>>()?;
    Ok(PartitionScheme {
        n_splits,
        train_fraction,
        seed,
        splits,
    })
}

/// A single stratified split holding out `test_fraction` of every class.
pub fn stratified_holdout<L: Ord + Copy>(labels: &[L], test_fraction: f64, seed: u64) -> Result<Split> {
    split_once(labels, test_fraction, derive_seed(seed, u64::MAX))
}

/// Per class, `clamp(round(f · n_k), 1, n_k - 1)` rows go to validation.
fn split_once<L: Ord + Copy>(labels: &[L], held_out: f64, seed: u64) -> Result<Split> {
    if !(held_out > 0.0 && held_out < 1.0) {
        return Err(Error::invalid(format!("held-out fraction must be in (0, 1), got {held_out}")));
    }
    let mut by_class: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if by_class.is_empty() {
        return Err(Error::invalid("no labels to partition"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(labels.len());
    let mut validation = Vec::new();
    for (k, (_, mut rows)) in by_class.into_iter().enumerate() {
        let n = rows.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "class #{k} has {n} sample(s); at least 2 are required"
            )));
        }
        let n_val = ((held_out * n as f64).round() as usize).clamp(1, n - 1);
        rows.shuffle(&mut rng);
        validation.extend_from_slice(&rows[..n_val]);
        train.extend_from_slice(&rows[n_val..]);
    }
    train.sort_unstable();
    validation.sort_unstable();
    Ok(Split { train, validation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eighty_twenty_counts() {
        let labels: Vec<u8> = (0..100).map(|i| (i >= 80) as u8).collect();
        let p = stratified_partitions(&labels, 3).unwrap();
        assert_eq!(p.splits.len(), 10);
        for s in &p.splits {
            let val1 = s.validation.iter().filter(|&&i| labels[i] == 1).count();
            let tr1 = s.train.iter().filter(|&&i| labels[i] == 1).count();
            assert_eq!((s.train.len() - tr1, tr1), (64, 16));
            assert_eq!((s.validation.len() - val1, val1), (16, 4));
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let labels: Vec<u8> = (0..60).map(|i| (i % 3) as u8).collect();
        assert_eq!(stratified_partitions(&labels, 11).unwrap(), stratified_partitions(&labels, 11).unwrap());
        for (a, b) in [(1, 2), (3, 4), (5, 6), (7, 8), (9, 10)] {
            assert_ne!(
                stratified_partitions(&labels, a).unwrap().splits,
                stratified_partitions(&labels, b).unwrap().splits
            );
        }
    }

    #[test]
    fn singleton_class_is_rejected() {
        assert!(stratified_partitions(&[0, 0, 0, 1], 0).is_err());
    }

    proptest! {
        #[test]
        fn splits_are_disjoint_exhaustive_and_stratified(
            labels in proptest::collection::vec(0u8..3, 6..120),
            seed in any::<u64>(),
        ) {
            let mut counts = [0usize; 3];
            for &l in &labels { counts[l as usize] += 1; }
            prop_assume!(counts.iter().all(|&c| c == 0 || c >= 2));
            let p = stratified_partitions(&labels, seed).unwrap();
            for s in &p.splits {
                let mut all: Vec<usize> = s.train.iter().chain(&s.validation).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
                for k in 0..3u8 {
                    let n_k = counts[k as usize] as f64;
                    if n_k == 0.0 { continue; }
                    let v_k = s.validation.iter().filter(|&&i| labels[i] == k).count() as f64;
                    prop_assert!((v_k - 0.2 * n_k).abs() <= 1.0);
                }
            }
        }
    }
}
