use super::backward::gradients_masked;
use super::forward::{impute, LossKind};
use super::optim::{Optimizer, OptimizerKind};
use super::{ModelDims, ModelError, ModelParams, LEAKY_SLOPE};
use crate::frame::FilterBank;
use crate::graph::{generate_mask, Laplacian, MaskMatrix, Mechanism};
use crate::metrics::{hidden_squared_error, pooled_rmse};
use crate::oracle::{eigendecompose, spectral_entropy, SpectralDecomposition, MIN_ENERGY};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A training graph. Entries outside `known` (when given) are never shown to
/// the model nor scored.
#[derive(Debug, Clone)]
pub struct GraphSample {
    pub laplacian: Laplacian,
    pub features: Array2<f64>,
    pub known: Option<MaskMatrix>,
}

/// A graph with a fixed observation mask, used for model selection.
///
/// Error is measured on the hidden entries of `scored`, or of `mask` when
/// `scored` is `None`.
#[derive(Debug, Clone)]
pub struct MaskedSample {
    pub laplacian: Laplacian,
    pub features: Array2<f64>,
    pub mask: MaskMatrix,
    pub scored: Option<MaskMatrix>,
}

impl MaskedSample {
    pub fn scoring_mask(&self) -> &MaskMatrix {
        self.scored.as_ref().unwrap_or(&self.mask)
    }
}

/// Input and loss masks for one training step: the fresh mask hides some
/// known entries and the loss is measured on exactly those.
fn step_masks(fresh: MaskMatrix, known: Option<&MaskMatrix>) -> (MaskMatrix, MaskMatrix) {
    match known {
        None => (fresh.clone(), fresh),
        Some(k) => {
            let input = fresh.intersect(k);
            let mut excluded = fresh.observed().clone();
            ndarray::Zip::from(&mut excluded).and(k.observed()).for_each(|e, &kn| *e = *e || !kn);
            (input, MaskMatrix::new(excluded))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the latent entropy term.
    pub gamma: f64,
    pub h1: usize,
    pub h2: usize,
    pub h3: usize,
    pub slope: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
    /// Training graphs get a fresh mask from this mechanism every epoch.
    pub mask_mechanism: Mechanism,
    pub mask_rate: f64,
    /// Number of validation graphs whose output spectral entropy is traced.
    pub probe_graphs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            h1: 32,
            h2: 16,
            h3: 16,
            slope: LEAKY_SLOPE,
            learning_rate: 1e-3,
            epochs: 500,
            seed: 0,
            optimizer: OptimizerKind::default(),
            loss: LossKind::Norm,
            mask_mechanism: Mechanism::Mcar,
            mask_rate: 0.1,
            probe_graphs: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be a nonnegative number, got {}", self.gamma));
        }
        if self.h1 == 0 || self.h2 == 0 || self.h3 == 0 {
            return bad("hidden widths must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.mask_rate > 0.0 && self.mask_rate < 1.0) {
            return bad(format!("training mask rate must lie in (0, 1), got {}", self.mask_rate));
        }
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return bad(format!("leaky slope must lie in (0, 1), got {}", self.slope));
        }
        Ok(())
    }

    pub fn dims(&self, channels: usize, d_in: usize) -> ModelDims {
        ModelDims { channels, d_in, h1: self.h1, h2: self.h2, h3: self.h3 }
    }
}

/// Per-epoch measurements. `val_rmse` and `output_entropy` have one extra
/// leading entry for the initialization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub reconstruction: Vec<f64>,
    pub entropy: Vec<f64>,
    pub val_rmse: Vec<f64>,
    pub output_entropy: Vec<f64>,
    pub best_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub trace: TrainTrace,
}

struct Probe<'a> {
    sample: &'a MaskedSample,
    sd: SpectralDecomposition,
}

fn validation_rmse(params: &ModelParams, filters: &FilterBank, val: &[MaskedSample]) -> Result<f64, ModelError> {
    let mut parts = Vec::with_capacity(val.len());
    for s in val {
        let out = impute(params, &s.laplacian, filters, &s.features, &s.mask)?;
        parts.push(hidden_squared_error(&out, &s.features, s.scoring_mask()).expect("shapes checked by impute"));
    }
    Ok(pooled_rmse(parts).unwrap_or(f64::NAN))
}

/// Mean spectral entropy of the imputed feature columns.
fn probe_entropy(params: &ModelParams, filters: &FilterBank, probes: &[Probe<'_>]) -> Result<f64, ModelError> {
    let mut sum = 0.0;
    let mut count = 0;
    for p in probes {
        let out = impute(params, &p.sample.laplacian, filters, &p.sample.features, &p.sample.mask)?;
        for col in out.columns() {
            if col.dot(&col) > MIN_ENERGY {
                sum += spectral_entropy(col, &p.sd).expect("dimensions match");
                count += 1;
            }
        }
    }
    Ok(if count > 0 { sum / count as f64 } else { f64::NAN })
}

/// Full-batch training, one optimizer step per graph per epoch.
///
/// The parameters returned are those of the epoch with the lowest
/// validation RMSE (the last epoch when there is no validation set).
pub fn train(
    filters: &FilterBank,
    train_set: &[GraphSample],
    val: &[MaskedSample],
    cfg: &TrainConfig,
) -> Result<TrainedModel, ModelError> {
    cfg.validate()?;
    let d_in =
        train_set.first().map(|s| s.features.ncols()).ok_or_else(|| ModelError::Config("no training graphs".into()))?;
    let mut params = ModelParams::init(cfg.dims(filters.channels(), d_in), cfg.slope, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, &params);

    let probes: Vec<Probe<'_>> = val
        .iter()
        .take(cfg.probe_graphs)
        .map(|sample| Probe {
            sample,
            sd: eigendecompose(&sample.laplacian).expect("validation graph fits the oracle"),
        })
        .collect();

    let mut trace = TrainTrace::default();
    let mut best = (validation_rmse(&params, filters, val)?, params.clone());
    trace.val_rmse.push(best.0);
    trace.output_entropy.push(probe_entropy(&params, filters, &probes)?);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        let epoch_start = params.clone();
        order.shuffle(&mut rng);
        let (mut sum_r, mut sum_s) = (0.0, 0.0);
        for &i in &order {
            let s = &train_set[i];
            let fresh = generate_mask(s.features.view(), cfg.mask_mechanism, cfg.mask_rate, rng.random())?;
            let (input, loss_mask) = step_masks(fresh, s.known.as_ref());
            let step = match gradients_masked(
                &params,
                &s.laplacian,
                filters,
                &s.features,
                &input,
                &loss_mask,
                cfg.gamma,
                cfg.loss,
            ) {
                Ok(r) if r.total.is_finite() => r,
                Ok(r) => return Err(ModelError::Diverged { epoch, loss: r.total, last_good: Box::new(epoch_start) }),
                Err(ModelError::NonFiniteGradient { tensor, count }) => {
                    log::error!("epoch {epoch}, graph {i}: {count} non-finite gradient entries in {tensor}");
                    return Err(ModelError::Diverged { epoch, loss: f64::NAN, last_good: Box::new(epoch_start) });
                }
                Err(e) => return Err(e),
            };
            sum_r += step.reconstruction;
            sum_s += step.entropy;
            opt.apply(&mut params, &step.grads);
        }
        if !params.is_finite() {
            return Err(ModelError::Diverged { epoch, loss: f64::NAN, last_good: Box::new(epoch_start) });
        }
        let n = train_set.len() as f64;
        trace.reconstruction.push(sum_r / n);
        trace.entropy.push(sum_s / n);
        let v = validation_rmse(&params, filters, val)?;
        trace.val_rmse.push(v);
        trace.output_entropy.push(probe_entropy(&params, filters, &probes)?);
        log::debug!("epoch {epoch}: L_R {:.5} L_S {:.4} val {v:.5}", sum_r / n, sum_s / n);
        if val.is_empty() || v < best.0 {
            best = (v, params.clone());
            trace.best_epoch = epoch;
        }
    }
    Ok(TrainedModel { params: best.1, trace })
}
