use crate::error::{Error, Result};
use crate::networks::Parameterized;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrPhase {
    pub epochs: usize,
    pub lr: f32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    /// Consecutive constant-rate phases; their epoch counts sum to the run length.
    pub phases: Vec<LrPhase>,
    pub steps_per_epoch: usize,
    pub batch_size: usize,
    pub momentum: f32,
    /// Label radius in response-grid elements.
    pub label_radius: f32,
    pub seed: u64,
}

impl SgdConfig {
    /// 30 epochs, 0.01 for the first 25 and 0.001 for the last 5.
    pub fn paper() -> Self {
        SgdConfig {
            phases: vec![
                LrPhase {
                    epochs: 25,
                    lr: 0.01,
                },
                LrPhase {
                    epochs: 5,
                    lr: 0.001,
                },
            ],
            steps_per_epoch: 50,
            batch_size: 8,
            momentum: 0.9,
            label_radius: 2.0,
            seed: 0,
        }
    }

    pub fn constant(epochs: usize, steps_per_epoch: usize, lr: f32) -> Self {
        SgdConfig {
            phases: vec![LrPhase { epochs, lr }],
            steps_per_epoch,
            ..SgdConfig::paper()
        }
    }

    pub fn epochs(&self) -> usize {
        self.phases.iter().map(|p| p.epochs).sum()
    }

    /// Learning rate of 1-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f32 {
        let mut end = 0;
        for p in &self.phases {
            end += p.epochs;
            if epoch <= end {
                return p.lr;
            }
        }
        self.phases.last().map_or(0.0, |p| p.lr)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty()
            || self.epochs() == 0
            || self.steps_per_epoch == 0
            || self.batch_size == 0
        {
            return Err(Error::config(
                "schedule needs at least one epoch, step and sample",
            ));
        }
        if self
            .phases
            .iter()
            .any(|p| !(p.lr >= 0.0) || !p.lr.is_finite())
        {
            return Err(Error::config(
                "learning rates must be finite and non-negative",
            ));
        }
        if self.phases.windows(2).any(|w| w[1].lr > w[0].lr) {
            return Err(Error::config("learning rates must be non-increasing"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        if !(self.label_radius > 0.0) {
            return Err(Error::config("label radius must be positive"));
        }
        Ok(())
    }
}

/// Heavy-ball SGD: `v <- mu v + g`, `p <- p - lr v`.
pub struct Momentum {
    momentum: f32,
    velocity: Vec<Vec<f32>>,
}

impl Momentum {
    pub fn new(params: &impl Parameterized, momentum: f32) -> Self {
        let mut velocity = Vec::new();
        params.visit_params(&mut |_, _, d| velocity.push(vec![0.0; d.len()]));
        Momentum { momentum, velocity }
    }

    /// `grads` must follow the parameters' visiting order. A zero rate
    /// leaves the parameters bit-identical.
    pub fn step(
        &mut self,
        params: &mut impl Parameterized,
        grads: &[Tensor],
        lr: f32,
    ) -> Result<()> {
        if grads.len() != self.velocity.len() {
            return Err(Error::contract(format!(
                "{} gradient blocks for {} parameter blocks",
                grads.len(),
                self.velocity.len()
            )));
        }
        let mu = self.momentum;
        let mut i = 0;
        let mut bad = None;
        params.visit_params_mut(&mut |name, p| {
            let (v, g) = (&mut self.velocity[i], grads[i].data());
            if g.len() != p.len() {
                bad.get_or_insert_with(|| name.to_string());
            } else {
                for ((pv, vv), gv) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *vv = mu * *vv + gv;
                    if lr != 0.0 {
                        *pv -= lr * *vv;
                    }
                }
            }
            i += 1;
        });
        match bad {
            Some(name) => Err(Error::contract(format!(
                "gradient for {name} has the wrong length"
            ))),
            None => Ok(()),
        }
    }
}
