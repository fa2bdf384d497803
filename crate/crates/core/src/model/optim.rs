use super::ModelParams;
use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    GradientDescent,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Optimizer state for one parameter set.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: &ModelParams) -> Self {
        let zeros = || params.tensors().iter().map(|t| Array2::zeros(t.raw_dim())).collect::<Vec<_>>();
        let (first, second) = match kind {
            OptimizerKind::GradientDescent => (vec![], vec![]),
            OptimizerKind::Adam { .. } => (zeros(), zeros()),
        };
        Self { kind, lr, step: 0, first, second }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn apply(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        let lr = self.lr;
        match self.kind {
            OptimizerKind::GradientDescent => {
                for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                    p.scaled_add(-lr, g);
                }
            }
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                for (((p, g), m), v) in
                    params.tensors_mut().into_iter().zip(grads.tensors()).zip(&mut self.first).zip(&mut self.second)
                {
                    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
                    });
                }
            }
        }
    }
}
