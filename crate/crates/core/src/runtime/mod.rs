//! Training schedule, optimizer, training loop, checkpoints, and decoding.

mod checkpoint;
mod decode;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Grads, ParamStore, Tensor};

pub use checkpoint::{Checkpoint, VocabRef};
pub use decode::{
    beam_decode, greedy_decode, log_softmax, pcs_confidence, step_pcs, GtnmSession, Prediction,
    StepModel,
};
pub use train::{evaluate_loss, fit, predict_all, FitOutcome, LogEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Linear warmup, then the base rate.
    #[default]
    Constant,
    /// Linear warmup, then `base · sqrt(warmup / step)`.
    InverseSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub warmup_steps: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub schedule: Schedule,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Stop after the first epoch whose validation EM reaches this value.
    pub target_em: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base_lr: 3e-4,
            warmup_steps: 4000,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            schedule: Schedule::Constant,
            clip_norm: Some(1.0),
            target_em: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::Config(format!("base_lr must be positive, got {}", self.base_lr)));
        }
        if self.warmup_steps == 0 || self.batch_size == 0 {
            return Err(Error::Config("warmup_steps and batch_size must be at least 1".into()));
        }
        if self.clip_norm.is_some_and(|c| c <= 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Learning rate for update number `step`.
pub fn lr_at(step: u64, cfg: &TrainConfig) -> f64 {
    let w = cfg.warmup_steps.max(1);
    if step <= w {
        return cfg.base_lr * step as f64 / w as f64;
    }
    match cfg.schedule {
        Schedule::Constant => cfg.base_lr,
        Schedule::InverseSqrt => cfg.base_lr * (w as f64 / step as f64).sqrt(),
    }
}

/// Adam with bias correction; β1 = 0.9, β2 = 0.999, ε = 1e-8.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(params: &ParamStore) -> Self {
        let zeros = || params.iter().map(|(_, t)| Tensor::zeros(&t.shape)).collect();
        Adam {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    /// One update. A non-finite gradient aborts before anything changes.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Grads, lr: f64) -> Result<()> {
        for (id, buf) in params.ids().zip(&grads.bufs) {
            if let Some(i) = buf.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient(format!(
                    "`{}`[{i}] = {} at update {}",
                    params.name(id),
                    buf[i],
                    self.t + 1
                )));
            }
        }
        self.t += 1;
        let (b1, b2) = (Self::BETA1 as f32, Self::BETA2 as f32);
        let c1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let c2 = 1.0 - Self::BETA2.powi(self.t as i32);
        let step = (lr / c1) as f32;
        let c2 = c2 as f32;
        let eps = Self::EPS as f32;
        for (k, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let g = &grads.bufs[k];
            let (m, v) = (&mut self.m[k].data, &mut self.v[k].data);
            let w = &mut params.get_mut(id).data;
            for i in 0..w.len() {
                if g[i] == 0.0 && m[i] == 0.0 && v[i] == 0.0 {
                    continue;
                }
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                w[i] -= step * m[i] / ((v[i] / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Scales `grads` so their global norm is at most `max`; returns the norm
/// before clipping.
pub fn clip_grads(grads: &mut Grads, max: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max {
        grads.scale((max / norm) as f32);
    }
    norm
}
