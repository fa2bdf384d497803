//! Error metrics over hidden entries.

use crate::graph::MaskMatrix;
use ndarray::{Array2, Zip};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no hidden entries to score")]
    NoHiddenEntries,
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
}

/// Sum of squared errors and count over entries with `R = 0`.
pub fn hidden_squared_error(
    imputed: &Array2<f64>,
    truth: &Array2<f64>,
    mask: &MaskMatrix,
) -> Result<(f64, usize), MetricError> {
    if imputed.dim() != truth.dim() || mask.shape() != truth.dim() {
        return Err(MetricError::ShapeMismatch(imputed.dim(), truth.dim()));
    }
    let mut sum = 0.0;
    let mut count = 0;
    Zip::from(imputed).and(truth).and(mask.observed()).for_each(|&a, &b, &seen| {
        if !seen {
            sum += (a - b) * (a - b);
            count += 1;
        }
    });
    Ok((sum, count))
}

/// Root mean squared error over hidden entries only.
pub fn rmse(imputed: &Array2<f64>, truth: &Array2<f64>, mask: &MaskMatrix) -> Result<f64, MetricError> {
    pooled_rmse([hidden_squared_error(imputed, truth, mask)?])
}

/// RMSE pooled over several `(sum of squares, count)` pairs.
pub fn pooled_rmse(parts: impl IntoIterator<Item = (f64, usize)>) -> Result<f64, MetricError> {
    let (sum, count) = parts.into_iter().fold((0.0, 0), |(s, c), (a, b)| (s + a, c + b));
    if count == 0 {
        return Err(MetricError::NoHiddenEntries);
    }
    Ok((sum / count as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn basic_cases() {
        let x = arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        let mut obs = Array2::from_elem((2, 2), true);
        obs[[1, 0]] = false;
        let mask = MaskMatrix::new(obs);
        assert_eq!(rmse(&x, &x, &mask).unwrap(), 0.0);
        let mut y = x.clone();
        y[[1, 0]] += 0.5;
        y[[0, 0]] += 100.0;
        assert_eq!(rmse(&y, &x, &mask).unwrap(), 0.5);
        assert_eq!(rmse(&x, &x, &MaskMatrix::all_observed((2, 2))), Err(MetricError::NoHiddenEntries));
    }

    #[test]
    fn pooling() {
        assert_eq!(pooled_rmse([(2.0, 1), (6.0, 1)]).unwrap(), 2.0);
    }
}
