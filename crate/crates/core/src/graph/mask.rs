use super::GraphError;
use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Missingness mechanism used to draw a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    /// Independent Bernoulli drop per entry.
    Mcar,
    /// Logistic in a fully observed subset of "conditioning" columns.
    Mar,
    /// Self-masking: values above their column median drop more often.
    Mnar,
}

impl std::str::FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mcar" => Ok(Self::Mcar),
            "mar" => Ok(Self::Mar),
            "mnar" => Ok(Self::Mnar),
            other => Err(format!("unknown mechanism `{other}` (expected mcar, mar or mnar)")),
        }
    }
}

/// Observation pattern: `true` where the entry is observed (R = 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskMatrix {
    observed: Array2<bool>,
}

impl MaskMatrix {
    pub fn new(observed: Array2<bool>) -> Self {
        Self { observed }
    }

    pub fn all_observed(shape: (usize, usize)) -> Self {
        Self { observed: Array2::from_elem(shape, true) }
    }

    /// Parses a 0/1 matrix; any other value is an error.
    pub fn from_f64(values: &Array2<f64>) -> Result<Self, GraphError> {
        for ((row, col), &value) in values.indexed_iter() {
            if value != 0.0 && value != 1.0 {
                return Err(GraphError::InvalidMaskEntry { row, col, value });
            }
        }
        Ok(Self { observed: values.mapv(|v| v == 1.0) })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.observed.dim()
    }

    pub fn observed(&self) -> &Array2<bool> {
        &self.observed
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.observed[[row, col]]
    }

    /// R as a 0/1 float matrix.
    pub fn to_f64(&self) -> Array2<f64> {
        self.observed.mapv(|o| if o { 1.0 } else { 0.0 })
    }

    /// 1 - R as a 0/1 float matrix.
    pub fn hidden_f64(&self) -> Array2<f64> {
        self.observed.mapv(|o| if o { 0.0 } else { 1.0 })
    }

    pub fn hidden_count(&self) -> usize {
        self.observed.iter().filter(|o| !**o).count()
    }

    pub fn hidden_fraction(&self) -> f64 {
        self.hidden_count() as f64 / self.observed.len().max(1) as f64
    }

    /// Entries hidden in either mask stay hidden.
    pub fn intersect(&self, other: &MaskMatrix) -> MaskMatrix {
        let mut observed = self.observed.clone();
        observed.zip_mut_with(&other.observed, |a, b| *a = *a && *b);
        MaskMatrix { observed }
    }
}

/// Draws a mask over the shape of `values` with the given mechanism.
///
/// The expected fraction of hidden entries equals `rate`; the result is a
/// pure function of `(values, mechanism, rate, seed)`. `values` is only read
/// by the MAR and MNAR mechanisms.
pub fn generate_mask(
    values: ArrayView2<'_, f64>,
    mechanism: Mechanism,
    rate: f64,
    seed: u64,
) -> Result<MaskMatrix, GraphError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(GraphError::InvalidRate(rate));
    }
    let shape = values.dim();
    if rate == 0.0 || values.is_empty() {
        return Ok(MaskMatrix::all_observed(shape));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drop_prob = match mechanism {
        Mechanism::Mcar => Array2::from_elem(shape, rate),
        Mechanism::Mar if shape.1 >= 2 => mar_probabilities(values, rate, &mut rng),
        Mechanism::Mar => Array2::from_elem(shape, rate),
        Mechanism::Mnar => mnar_probabilities(values, rate),
    };
    let observed = drop_prob.mapv(|p| rng.random::<f64>() >= p);
    Ok(MaskMatrix { observed })
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn mar_probabilities(values: ArrayView2<'_, f64>, rate: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (n, d) = values.dim();
    let n_cond = ((0.3 * d as f64).round() as usize).clamp(1, d - 1);
    let mut cols: Vec<usize> = (0..d).collect();
    cols.shuffle(rng);
    let cond = &cols[..n_cond];
    let weights: Vec<f64> = cond.iter().map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt().max(1e-12);

    let mut score = vec![0.0; n];
    for (&c, &w) in cond.iter().zip(&weights) {
        let col = values.column(c);
        let mean = col.mean().unwrap_or(0.0);
        let sd = col.std(0.0).max(1e-12);
        for (s, &x) in score.iter_mut().zip(col.iter()) {
            *s += w / norm * (x - mean) / sd;
        }
    }
    // Conditioning columns stay observed, so the rest must carry the full rate.
    let target = (rate * d as f64 / (d - n_cond) as f64).min(0.99);
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mean = score.iter().map(|s| sigmoid(s + mid)).sum::<f64>() / n as f64;
        if mean < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shift = 0.5 * (lo + hi);
    let mut probs = Array2::zeros((n, d));
    for i in 0..n {
        let p = sigmoid(score[i] + shift);
        for j in 0..d {
            if !cond.contains(&j) {
                probs[[i, j]] = p;
            }
        }
    }
    probs
}

/// Ratio between the drop probability above and below the column median.
const MNAR_ELEVATION: f64 = 3.0;

fn mnar_probabilities(values: ArrayView2<'_, f64>, rate: f64) -> Array2<f64> {
    let (n, d) = values.dim();
    let mut probs = Array2::zeros((n, d));
    for (j, col) in values.axis_iter(Axis(1)).enumerate() {
        let mut sorted = col.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
        let n_hi = col.iter().filter(|&&x| x > median).count() as f64;
        let n_lo = n as f64 - n_hi;
        let budget = rate * n as f64;
        let mut p_lo = budget / (n_lo + MNAR_ELEVATION * n_hi);
        let mut p_hi = MNAR_ELEVATION * p_lo;
        if p_hi > 1.0 {
            p_hi = 1.0;
            p_lo = if n_lo > 0.0 { ((budget - n_hi) / n_lo).clamp(0.0, 1.0) } else { 0.0 };
        }
        for (i, &x) in col.iter().enumerate() {
            probs[[i, j]] = if x > median { p_hi } else { p_lo };
        }
    }
    probs
}
