//! Seeded, nested partition of a corpus into training prefixes, an evaluation
//! set and the remainder.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index-based split; training sets are prefixes of one shuffled order, so a
/// smaller training set is always contained in every larger one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub seed: u64,
    pub order: Vec<usize>,
    pub train_sizes: Vec<usize>,
    pub eval: Vec<usize>,
    pub remainder: Vec<usize>,
}

impl CorpusSplit {
    pub fn train(&self, size: usize) -> Result<&[usize]> {
        if !self.train_sizes.contains(&size) {
            return Err(Error::Sizing(format!("no training subset of size {size}")));
        }
        Ok(&self.order[..size])
    }

    pub fn max_train(&self) -> usize {
        self.train_sizes.iter().copied().max().unwrap_or(0)
    }

    /// Document ids per partition, for the on-disk manifest.
    pub fn manifest(&self, doc_ids: &[&str]) -> serde_json::Value {
        let ids = |idx: &[usize]| idx.iter().map(|&i| doc_ids[i].to_string()).collect::<Vec<_>>();
        let train: serde_json::Map<String, serde_json::Value> = self
            .train_sizes
            .iter()
            .map(|&n| (n.to_string(), serde_json::json!(ids(&self.order[..n]))))
            .collect();
        serde_json::json!({
            "seed": self.seed,
            "train": train,
            "eval": ids(&self.eval),
            "remainder": ids(&self.remainder),
        })
    }
}

/// Shuffles `n` indices with `seed` and carves out nested training prefixes,
/// then `eval_size` evaluation documents, then the rest.
pub fn split_corpus(n: usize, train_sizes: &[usize], eval_size: usize, seed: u64) -> Result<CorpusSplit> {
    let mut sizes = train_sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.first() == Some(&0) {
        return Err(Error::Sizing("training subset sizes must be positive".into()));
    }
    let max_train = sizes.last().copied().unwrap_or(0);
    if max_train + eval_size > n {
        return Err(Error::Sizing(format!(
            "largest training subset ({max_train}) plus evaluation set ({eval_size}) exceeds corpus size {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let eval = order[max_train..max_train + eval_size].to_vec();
    let remainder = order[max_train + eval_size..].to_vec();
    Ok(CorpusSplit {
        seed,
        order,
        train_sizes: sizes,
        eval,
        remainder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn nested_and_disjoint() {
        let s = split_corpus(100, &[40, 10, 20], 30, 5).unwrap();
        assert_eq!(s.train_sizes, vec![10, 20, 40]);
        let t10: HashSet<_> = s.train(10).unwrap().iter().collect();
        let t40: HashSet<_> = s.train(40).unwrap().iter().collect();
        assert!(t10.is_subset(&t40));
        let ev: HashSet<_> = s.eval.iter().collect();
        assert!(ev.is_disjoint(&t40));
        assert_eq!(s.eval.len() + s.remainder.len() + 40, 100);
        assert!(s.train(15).is_err());
    }

    #[test]
    fn too_large_is_sizing_error() {
        assert!(matches!(split_corpus(50, &[40], 20, 1), Err(Error::Sizing(_))));
    }

    #[test]
    fn seed_determines_split() {
        assert_eq!(split_corpus(30, &[5], 5, 2).unwrap(), split_corpus(30, &[5], 5, 2).unwrap());
        assert_ne!(split_corpus(30, &[5], 5, 2).unwrap(), split_corpus(30, &[5], 5, 3).unwrap());
    }
}
