use super::GraphError;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Train/validation/test fractions; must be nonnegative and sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for Proportions {
    fn default() -> Self {
        Self { train: 0.7, val: 0.1, test: 0.2 }
    }
}

/// Disjoint index sets covering `0..count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.val.len(), self.test.len()]
    }
}

/// Shuffles `0..count` and cuts it into train/val/test.
///
/// Train and validation sizes are `round(p * count)` (half away from zero);
/// the test set takes the remainder. Every set must end up nonempty.
pub fn split_dataset(count: usize, proportions: Proportions, seed: u64) -> Result<DatasetSplit, GraphError> {
    let p = [proportions.train, proportions.val, proportions.test];
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(GraphError::InvalidProportions(p));
    }
    let n_train = (proportions.train * count as f64).round() as usize;
    let n_val = ((proportions.val * count as f64).round() as usize).min(count.saturating_sub(n_train));
    let n_test = count - n_train - n_val;
    let sizes = [n_train, n_val, n_test];
    if sizes.contains(&0) {
        return Err(GraphError::SplitTooSmall { count, sizes });
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok(DatasetSplit { train: order, val, test, seed })
}
