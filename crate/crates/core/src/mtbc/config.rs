use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::ReprArch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Architecture and norm bounds of the policy class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub repr_dim: usize,
    pub c_phi: f64,
    pub c_f: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            repr_dim: 32,
            c_phi: 10.0,
            c_f: 10.0,
        }
    }
}

impl ModelConfig {
    pub fn arch(&self, obs_dim: usize) -> ReprArch {
        ReprArch {
            obs_dim,
            hidden: self.hidden.clone(),
            out_dim: self.repr_dim,
            c_phi: self.c_phi,
        }
    }

    /// Loss bound `B = log|A| + 2 C_phi C_F`.
    pub fn loss_bound(&self, num_actions: usize) -> f64 {
        (num_actions as f64).ln() + 2.0 * self.c_phi * self.c_f
    }

    pub fn validate(&self) -> Result<()> {
        if self.repr_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if !(self.c_phi > 0.0 && self.c_f > 0.0) || !self.c_phi.is_finite() || !self.c_f.is_finite() {
            return Err(Error::invalid("C_phi and C_F must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_repr: f64,
    pub lr_head: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 128,
            lr_repr: 1e-3,
            lr_head: 1e-3,
            seed: 0,
            optimizer: Optimizer::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if !(self.lr_repr > 0.0 && self.lr_head > 0.0) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::invalid("Adam needs betas in [0, 1) and eps > 0"));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}
