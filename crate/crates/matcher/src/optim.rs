//! Decoupled-weight-decay Adam with linear learning-rate warmup.

use serde::{Deserialize, Serialize};

use crate::tape::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub warmup_start: f64,
    pub warmup_steps: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-8,
            weight_decay: 1e-4,
            warmup_start: 1e-8,
            warmup_steps: 100,
        }
    }
}

impl OptimConfig {
    /// Learning rate at optimizer step `step` (0-based).
    pub fn lr_at(&self, step: usize) -> f64 {
        if self.warmup_steps == 0 || step >= self.warmup_steps {
            return self.lr;
        }
        let f = step as f64 / self.warmup_steps as f64;
        self.warmup_start + (self.lr - self.warmup_start) * f
    }
}

#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: OptimConfig,
    m: Vec<Mat>,
    v: Vec<Mat>,
    step: usize,
}

impl AdamW {
    pub fn new(config: OptimConfig, params: &[Mat]) -> Self {
        let zeros = || params.iter().map(|p| Mat::zeros(p.nrows(), p.ncols())).collect();
        Self {
            config,
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn step(&mut self, params: &mut [Mat], grads: &[Mat]) {
        let c = self.config;
        let lr = c.lr_at(self.step);
        self.step += 1;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for k in 0..p.len() {
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
                let update = (m[k] / bc1) / ((v[k] / bc2).sqrt() + c.eps);
                p[k] -= lr * (update + c.weight_decay * p[k]);
            }
        }
    }
}
