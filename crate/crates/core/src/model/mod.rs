//! The multi-channel wavelet autoencoder.
//!
//! Every channel `m` runs the same masked input through its own filter and
//! a two-layer perceptron, then back through a synthesis filter and one more
//! layer. Channel outputs are concatenated and mapped back to the feature
//! dimension:
//!
//! ```text
//! Z1_m = phi(p_m(L) (X . R) W0_m)      Z2_m = phi(Z1_m W1_m)
//! Z3_m = phi(q_m(L) Z2_m W2_m)         X~   = phi([Z3_1 .. Z3_M] W3)
//! ```
//!
//! `phi` is a leaky ReLU.

mod backward;
mod checkpoint;
mod forward;
mod optim;
mod train;

pub use backward::{gradients, gradients_masked, GradientReport};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader,
};
pub use forward::{
    channel_energies, decode, encode, entropy_loss, forward, impute, reconstruction_loss, total_loss, LatentState,
    LossKind,
};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{train, GraphSample, MaskedSample, TrainConfig, TrainTrace, TrainedModel};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default negative slope of the leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch { what: String, expected: (usize, usize), got: (usize, usize) },
    #[error("non-finite gradient in {tensor} ({count} entries)")]
    NonFiniteGradient { tensor: String, count: usize },
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64, last_good: Box<ModelParams> },
    #[error("filter error: {0}")]
    Filter(#[from] crate::frame::FrameError),
    #[error("mask error: {0}")]
    Mask(#[from] crate::graph::GraphError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_shape(what: &str, a: &Array2<f64>, expected: (usize, usize)) -> Result<(), ModelError> {
    if a.dim() == expected {
        Ok(())
    } else {
        Err(ModelError::ShapeMismatch { what: what.to_string(), expected, got: a.dim() })
    }
}

/// Layer widths. `channels` is the number of frame channels `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub channels: usize,
    pub d_in: usize,
    pub h1: usize,
    pub h2: usize,
    pub h3: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelWeights {
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

/// All trainable weights plus the activation slope.
///
/// The same type doubles as a gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub slope: f64,
    pub channels: Vec<ChannelWeights>,
    pub w3: Array2<f64>,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

impl ModelParams {
    /// Glorot-uniform initialization from a seeded generator.
    pub fn init(dims: ModelDims, slope: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channels = (0..dims.channels)
            .map(|_| ChannelWeights {
                w0: glorot(dims.d_in, dims.h1, &mut rng),
                w1: glorot(dims.h1, dims.h2, &mut rng),
                w2: glorot(dims.h2, dims.h3, &mut rng),
            })
            .collect();
        let w3 = glorot(dims.channels * dims.h3, dims.d_in, &mut rng);
        Self { dims, slope, channels, w3 }
    }

    pub fn zeros(dims: ModelDims, slope: f64) -> Self {
        let channels = (0..dims.channels)
            .map(|_| ChannelWeights {
                w0: Array2::zeros((dims.d_in, dims.h1)),
                w1: Array2::zeros((dims.h1, dims.h2)),
                w2: Array2::zeros((dims.h2, dims.h3)),
            })
            .collect();
        Self { dims, slope, channels, w3: Array2::zeros((dims.channels * dims.h3, dims.d_in)) }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims, self.slope)
    }

    /// Weight matrices in a fixed order: `W0_m, W1_m, W2_m` for each channel,
    /// then `W3`.
    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut out: Vec<&Array2<f64>> = Vec::with_capacity(3 * self.channels.len() + 1);
        for c in &self.channels {
            out.extend([&c.w0, &c.w1, &c.w2]);
        }
        out.push(&self.w3);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out: Vec<&mut Array2<f64>> = Vec::with_capacity(3 * self.channels.len() + 1);
        for c in &mut self.channels {
            out.extend([&mut c.w0, &mut c.w1, &mut c.w2]);
        }
        out.push(&mut self.w3);
        out
    }

    /// Names matching [`ModelParams::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for m in 0..self.channels.len() {
            out.extend([format!("w0[{m}]"), format!("w1[{m}]"), format!("w2[{m}]")]);
        }
        out.push("w3".to_string());
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Checks that every tensor has the shape implied by `dims`.
    pub fn validate(&self) -> Result<(), ModelError> {
        let d = self.dims;
        if self.channels.len() != d.channels {
            return Err(ModelError::Config(format!("{} channel blocks for M = {}", self.channels.len(), d.channels)));
        }
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return Err(ModelError::Config(format!("leaky slope must lie in (0, 1), got {}", self.slope)));
        }
        for (m, c) in self.channels.iter().enumerate() {
            check_shape(&format!("w0[{m}]"), &c.w0, (d.d_in, d.h1))?;
            check_shape(&format!("w1[{m}]"), &c.w1, (d.h1, d.h2))?;
            check_shape(&format!("w2[{m}]"), &c.w2, (d.h2, d.h3))?;
        }
        check_shape("w3", &self.w3, (d.channels * d.h3, d.d_in))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> ModelDims {
        ModelDims { channels: 3, d_in: 4, h1: 5, h2: 6, h3: 7 }
    }

    #[test]
    fn init_shapes_and_limits() {
        let p = ModelParams::init(dims(), LEAKY_SLOPE, 1);
        p.validate().unwrap();
        assert_eq!(p.n_params(), 3 * (4 * 5 + 5 * 6 + 6 * 7) + 21 * 4);
        let limit = (6.0f64 / 9.0).sqrt();
        assert!(p.channels[0].w0.iter().all(|w| w.abs() <= limit));
        assert_eq!(p.tensor_names().len(), p.tensors().len());
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(ModelParams::init(dims(), 0.2, 5), ModelParams::init(dims(), 0.2, 5));
        assert_ne!(ModelParams::init(dims(), 0.2, 5), ModelParams::init(dims(), 0.2, 6));
    }

    #[test]
    fn validate_catches_bad_shapes() {
        let mut p = ModelParams::zeros(dims(), 0.2);
        p.w3 = Array2::zeros((3, 3));
        assert!(matches!(p.validate(), Err(ModelError::ShapeMismatch { .. })));
        let mut p = ModelParams::zeros(dims(), 0.2);
        p.slope = 1.5;
        assert!(matches!(p.validate(), Err(ModelError::Config(_))));
    }
}
