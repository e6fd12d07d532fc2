use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Train/validation/test sizes reported for the 5,856-image corpus.
pub const REFERENCE_SPLIT: [usize; 3] = [3748, 936, 1172];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPlan {
    pub seed: u64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitPlan {
    pub fn new(seed: u64, [train, val, test]: [usize; 3]) -> Self {
        Self { seed, train, val, test }
    }

    /// The reference proportions scaled to `n` items; exact for 5,856.
    pub fn scaled(n: usize, seed: u64) -> Self {
        let total: usize = REFERENCE_SPLIT.iter().sum();
        let train = (n * REFERENCE_SPLIT[0] + total / 2) / total;
        let val = (n * REFERENCE_SPLIT[1] + total / 2) / total;
        Self::new(seed, [train, val, n.saturating_sub(train + val)])
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded Fisher-Yates shuffle followed by a contiguous three-way cut.
pub fn shuffle_split<T>(mut items: Vec<T>, plan: &SplitPlan) -> Result<Splits<T>> {
    if plan.total() != items.len() {
        return Err(Error::CountMismatch {
            requested: plan.total(),
            available: items.len(),
        });
    }
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(plan.seed));
    let test = items.split_off(plan.train + plan.val);
    let val = items.split_off(plan.train);
    Ok(Splits {
        train: items,
        val,
        test,
    })
}
