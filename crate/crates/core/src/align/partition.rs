use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Split of one batch into the ground-truth subset (size ⌊r·N⌋) and the
/// soft-supervised remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    pub labeled_idx: Vec<usize>,
    pub soft_idx: Vec<usize>,
    pub r: f64,
    pub seed: u64,
}

impl PartitionPlan {
    pub fn len(&self) -> usize {
        self.labeled_idx.len() + self.soft_idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Everything labeled; used by the supervised-only ablation.
    pub fn all_labeled(n: usize) -> Self {
        PartitionPlan {
            labeled_idx: (0..n).collect(),
            soft_idx: Vec::new(),
            r: 1.0,
            seed: 0,
        }
    }
}

pub fn labeled_count(n: usize, r: f64) -> usize {
    ((r * n as f64).floor() as usize).min(n)
}

/// Uniformly random split; `seed` should already encode run, epoch and batch.
/// Both index lists come back sorted.
pub fn partition_batch(n: usize, r: f64, seed: u64) -> Result<PartitionPlan> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::config(format!("partition ratio {r} not in [0, 1]")));
    }
    if n == 0 {
        return Err(Error::shape("cannot partition an empty batch"));
    }
    let n1 = labeled_count(n, r);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from(seed, &[]));
    let mut labeled_idx = perm[..n1].to_vec();
    let mut soft_idx = perm[n1..].to_vec();
    labeled_idx.sort_unstable();
    soft_idx.sort_unstable();
    Ok(PartitionPlan {
        labeled_idx,
        soft_idx,
        r,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn paper_batch_at_full_ratio() {
        let p = partition_batch(400, 1.0, 3).unwrap();
        assert_eq!(p.labeled_idx.len(), 400);
        assert!(p.soft_idx.is_empty());
    }

    #[test]
    fn floor_arithmetic() {
        let p = partition_batch(10, 0.25, 3).unwrap();
        assert_eq!(p.labeled_idx.len(), 2);
        assert_eq!(p.soft_idx.len(), 8);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(
            partition_batch(50, 0.4, 9).unwrap(),
            partition_batch(50, 0.4, 9).unwrap()
        );
        assert_ne!(
            partition_batch(50, 0.4, 9).unwrap().labeled_idx,
            partition_batch(50, 0.4, 10).unwrap().labeled_idx
        );
    }

    #[test]
    fn ratio_out_of_range() {
        assert!(matches!(partition_batch(4, 1.5, 0), Err(Error::Config(_))));
        assert!(matches!(partition_batch(4, -0.1, 0), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn partition_covers_batch(n in 1usize..200, r in 0.0f64..=1.0, seed in any::<u64>()) {
            let p = partition_batch(n, r, seed).unwrap();
            prop_assert_eq!(p.labeled_idx.len(), (r * n as f64).floor() as usize);
            let mut all: Vec<usize> = p.labeled_idx.iter().chain(&p.soft_idx).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
