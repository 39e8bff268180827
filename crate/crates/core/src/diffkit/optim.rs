//! First-order optimizers over a [`ParamStore`].

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::nn::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Sgd { lr: f64, momentum: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig::Sgd { lr, momentum: 0.9 }
    }

    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn build(self, store: &ParamStore) -> Optimizer {
        let zeros: Vec<Matrix> = store
            .params
            .iter()
            .map(|p| Matrix::zeros(p.value.rows, p.value.cols))
            .collect();
        Optimizer {
            config: self,
            first: zeros.clone(),
            second: zeros,
            steps: 0,
        }
    }
}

/// Optimizer state: momentum buffers (SGD) or moment estimates (Adam).
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    steps: u64,
}

impl Optimizer {
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Matrix]) {
        assert_eq!(grads.len(), store.len(), "one gradient per parameter");
        self.steps += 1;
        match self.config {
            OptimizerConfig::Sgd { lr, momentum } => {
                for ((p, g), vel) in store.params.iter_mut().zip(grads).zip(&mut self.first) {
                    for ((w, &d), v) in p.value.data.iter_mut().zip(&g.data).zip(&mut vel.data) {
                        *v = momentum * *v + d;
                        *w -= lr * *v;
                    }
                }
            }
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in store
                    .params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for (((w, &d), mi), vi) in p
                        .value
                        .data
                        .iter_mut()
                        .zip(&g.data)
                        .zip(&mut m.data)
                        .zip(&mut v.data)
                    {
                        *mi = beta1 * *mi + (1.0 - beta1) * d;
                        *vi = beta2 * *vi + (1.0 - beta2) * d * d;
                        *w -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}
