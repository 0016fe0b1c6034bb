use serde::{Deserialize, Serialize};

use crate::error::{GqeError, Result};
use crate::model::ModelParams;
use crate::numkernel::Gradients;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConstants {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConstants {
    fn default() -> Self {
        AdamConstants {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments, one pair per tensor. Tensors absent from a step's
/// gradients are left untouched, moments included.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub constants: AdamConstants,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, constants: AdamConstants) -> Self {
        OptimizerState {
            constants,
            step: 0,
            first: params.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
            second: params.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    /// One bias-corrected Adam update. Gradients are checked for shape and
    /// finiteness before anything is modified.
    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients, lr: f64) -> Result<()> {
        for (id, g) in grads.iter() {
            let t = params
                .tensors
                .get(id.0)
                .ok_or_else(|| GqeError::Shape(format!("gradient for unknown tensor {}", id.0)))?;
            if g.len() != t.len() {
                return Err(GqeError::Shape(format!(
                    "gradient of {} has {} entries, tensor has {}",
                    params.name(id),
                    g.len(),
                    t.len()
                )));
            }
            if !g.iter().all(|x| x.is_finite()) {
                return Err(GqeError::Numeric(format!(
                    "non-finite gradient for tensor {}",
                    params.name(id)
                )));
            }
        }
        self.step += 1;
        let AdamConstants { beta1, beta2, eps } = self.constants;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (id, g) in grads.iter() {
            let (m, v) = (&mut self.first[id.0], &mut self.second[id.0]);
            let w = params.tensors[id.0].as_mut_slice();
            for i in 0..g.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                w[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
