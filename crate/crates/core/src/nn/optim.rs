use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    /// Global gradient-norm threshold.
    pub clip: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self { learning_rate: 7e-4, decay: 0.99, epsilon: 1e-5, clip: 40.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimStep {
    /// Norm of the raw gradient.
    pub grad_norm: f64,
    /// Norm of the gradient actually applied.
    pub applied_norm: f64,
}

/// Rescale `g` so its Euclidean norm is at most `clip`; returns the norm
/// before clipping.
pub fn clip_global_norm(g: &mut [f64], clip: f64) -> f64 {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > clip {
        let s = clip / norm;
        for x in g.iter_mut() {
            *x *= s;
        }
    }
    norm
}

/// RMSProp with a squared-gradient moving average per parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    pub mean_square: Vec<f64>,
    pub steps: u64,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig, params: usize) -> Self {
        Self { config, mean_square: vec![0.0; params], steps: 0 }
    }

    /// One clipped update. A non-finite gradient leaves parameters and
    /// state untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<OptimStep, NnError> {
        if params.len() != grads.len() || params.len() != self.mean_square.len() {
            return Err(NnError::Shape { stage: "optimizer", expected: params.len(), got: grads.len() });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NnError::NonFinite(format!("gradient component {i}")));
        }
        let mut g = grads.to_vec();
        let grad_norm = clip_global_norm(&mut g, self.config.clip);
        let applied_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let RmsPropConfig { learning_rate, decay, epsilon, .. } = self.config;
        for ((p, ms), gi) in params.iter_mut().zip(&mut self.mean_square).zip(&g) {
            *ms = decay * *ms + (1.0 - decay) * gi * gi;
            *p -= learning_rate * gi / (ms.sqrt() + epsilon);
        }
        self.steps += 1;
        Ok(OptimStep { grad_norm, applied_norm })
    }
}
