use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;

/// Optimization settings shared by every training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub base_lr: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub epochs: usize,
    /// At least 2: train-mode batch norm needs two rows.
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            base_lr: 0.01,
            decay_factor: 0.5,
            decay_every: 20,
            epochs: 350,
            batch_size: 32,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::Config(m.to_string()));
        if !(self.base_lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if self.decay_every == 0 {
            return bad("lr_decay_every must be positive");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        Ok(())
    }
}

/// `base_lr * decay_factor^floor(epoch / decay_every)`.
pub fn lr_at_epoch(h: &Hyper, epoch: usize) -> f64 {
    h.base_lr * h.decay_factor.powi((epoch / h.decay_every) as i32)
}
