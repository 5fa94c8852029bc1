//! Weight updates, learning-rate schedule and the training loop.
//!
//! Two update rules are provided:
//!
//! * SGD with momentum in velocity form: `v <- mu*v - lr*(g + wd*w)`, `w <- w + v`.
//! * Adam with bias-corrected moment estimates.
//!
//! Weight decay is coupled (added to the gradient) unless
//! [`OptimizerConfig::decoupled_weight_decay`] is set, and is never applied
//! to biases. The learning rate is divided by [`OptimizerConfig::lr_divisor`]
//! at every iteration listed in [`OptimizerConfig::lr_steps`].

mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::nn::{ExtraBlock, Network, ParamRole};

pub use crate::nn::he_init;
pub use train::{
    format_trace, parse_trace, AugmentFn, EvalFn, TraceRecord, TrainOptions, TrainTrace, Trainer,
    TrainingSample,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::SgdMomentum => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" | "sgd_momentum" => Ok(OptimizerKind::SgdMomentum),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::Config(format!("unknown optimizer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub decoupled_weight_decay: bool,
    /// Iterations after which the learning rate is divided by `lr_divisor`.
    pub lr_steps: Vec<u64>,
    pub lr_divisor: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-4)
    }
}

impl OptimizerConfig {
    fn base(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 5e-5,
            decoupled_weight_decay: false,
            lr_steps: vec![70_000],
            lr_divisor: 10.0,
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self::base(OptimizerKind::SgdMomentum, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self::base(OptimizerKind::Adam, learning_rate)
    }

    /// Default initial learning rate for an optimizer/loss pairing:
    /// SGD uses 1e-4 with binary cross entropy and 1e-2 with the cosine
    /// loss; Adam uses 1e-4.
    pub fn recommended(kind: OptimizerKind, loss: LossKind) -> Self {
        match (kind, loss) {
            (OptimizerKind::SgdMomentum, LossKind::Cosine) => Self::sgd(1e-2),
            (OptimizerKind::SgdMomentum, _) => Self::sgd(1e-4),
            (OptimizerKind::Adam, _) => Self::adam(1e-4),
        }
    }

    pub fn without_weight_decay(mut self) -> Self {
        self.weight_decay = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..1.0).contains(&v);
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be > 0", self.learning_rate)));
        }
        if !in_unit(self.momentum) || !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::Config("momentum and betas must lie in [0, 1)".into()));
        }
        if self.epsilon <= 0.0 || self.weight_decay < 0.0 || self.lr_divisor <= 0.0 {
            return Err(Error::Config("epsilon and lr divisor must be > 0, weight decay >= 0".into()));
        }
        Ok(())
    }
}

/// Learning rate in effect at (0-based) `iteration`.
pub fn lr_at(iteration: u64, config: &OptimizerConfig) -> f64 {
    let passed = config.lr_steps.iter().filter(|&&s| iteration >= s).count();
    config.learning_rate / config.lr_divisor.powi(passed as i32)
}

fn check_lengths(param: &[f64], grad: &[f64], slots: &[&[f64]]) -> Result<()> {
    if grad.len() != param.len() || slots.iter().any(|s| s.len() != param.len()) {
        return Err(Error::shape(format!(
            "parameter of length {} updated with gradient of length {}",
            param.len(),
            grad.len()
        )));
    }
    Ok(())
}

/// One SGD-with-momentum update in place.
pub fn sgd_momentum_step(
    param: &mut [f64],
    grad: &[f64],
    velocity: &mut [f64],
    lr: f64,
    config: &OptimizerConfig,
    decay: bool,
) -> Result<()> {
    check_lengths(param, grad, &[velocity])?;
    let wd = if decay { config.weight_decay } else { 0.0 };
    for ((w, &g), v) in param.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        let g = if config.decoupled_weight_decay { g } else { g + wd * *w };
        *v = config.momentum * *v - lr * g;
        if config.decoupled_weight_decay {
            *w -= lr * wd * *w;
        }
        *w += *v;
    }
    Ok(())
}

/// One Adam update in place; `step` is the 1-based update count.
#[allow(clippy::too_many_arguments)]
pub fn adam_step(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    lr: f64,
    config: &OptimizerConfig,
    decay: bool,
) -> Result<()> {
    check_lengths(param, grad, &[m, v])?;
    if step == 0 {
        return Err(Error::InvalidParameter("adam step count starts at 1".into()));
    }
    let wd = if decay { config.weight_decay } else { 0.0 };
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(step as i32);
    let c2 = 1.0 - b2.powi(step as i32);
    for (((w, &g), m), v) in param.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
        let g = if config.decoupled_weight_decay { g } else { g + wd * *w };
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let update = (*m / c1) / ((*v / c2).sqrt() + config.epsilon);
        if config.decoupled_weight_decay {
            *w -= lr * wd * *w;
        }
        *w -= lr * update;
    }
    Ok(())
}

/// Optimizer accumulators and the iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub iteration: u64,
    /// Velocity (SGD) or first moment (Adam), one slot per parameter block.
    pub first: Vec<Vec<f64>>,
    /// Second moment (Adam only; unused by SGD).
    pub second: Vec<Vec<f64>>,
}

const ITERATION_BLOCK: &str = "optim.iteration";

impl TrainState {
    pub fn new(net: &Network) -> Self {
        let zeros: Vec<Vec<f64>> = net.params().iter().map(|p| vec![0.0; p.value.len()]).collect();
        Self {
            iteration: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// Applies one update using the gradients currently stored in `net`.
    pub fn step(&mut self, net: &mut Network, config: &OptimizerConfig) -> Result<()> {
        if self.first.len() != net.params().len() {
            return Err(Error::shape("optimizer state does not match network"));
        }
        let lr = lr_at(self.iteration, config);
        for (i, p) in net.params_mut().iter_mut().enumerate() {
            let decay = p.spec.role == ParamRole::Weight;
            match config.kind {
                OptimizerKind::SgdMomentum => {
                    sgd_momentum_step(&mut p.value, &p.grad, &mut self.first[i], lr, config, decay)?
                }
                OptimizerKind::Adam => adam_step(
                    &mut p.value,
                    &p.grad,
                    &mut self.first[i],
                    &mut self.second[i],
                    self.iteration + 1,
                    lr,
                    config,
                    decay,
                )?,
            }
        }
        self.iteration += 1;
        Ok(())
    }

    /// State as named checkpoint blocks.
    pub fn to_blocks(&self, net: &Network) -> Vec<ExtraBlock> {
        let mut blocks = vec![ExtraBlock {
            name: ITERATION_BLOCK.into(),
            values: vec![self.iteration as f64],
        }];
        for (p, (m, v)) in net.params().iter().zip(self.first.iter().zip(&self.second)) {
            blocks.push(ExtraBlock {
                name: format!("optim.first.{}", p.name()),
                values: m.clone(),
            });
            blocks.push(ExtraBlock {
                name: format!("optim.second.{}", p.name()),
                values: v.clone(),
            });
        }
        blocks
    }

    /// Restores state written by [`TrainState::to_blocks`]; `None` if absent.
    pub fn from_blocks(net: &Network, blocks: &[ExtraBlock]) -> Result<Option<Self>> {
        let find = |name: &str| blocks.iter().find(|b| b.name == name);
        let Some(it) = find(ITERATION_BLOCK) else {
            return Ok(None);
        };
        let mut state = Self::new(net);
        state.iteration = it.values.first().copied().unwrap_or(0.0) as u64;
        for (i, p) in net.params().iter().enumerate() {
            for (slot, prefix) in [(&mut state.first[i], "first"), (&mut state.second[i], "second")] {
                let b = find(&format!("optim.{prefix}.{}", p.name()))
                    .ok_or_else(|| Error::Checkpoint(format!("missing optimizer block for {}", p.name())))?;
                if b.values.len() != slot.len() {
                    return Err(Error::Checkpoint(format!("optimizer block for {} has wrong length", p.name())));
                }
                slot.copy_from_slice(&b.values);
            }
        }
        Ok(Some(state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(kind: OptimizerKind, lr: f64) -> OptimizerConfig {
        let mut c = OptimizerConfig::base(kind, lr).without_weight_decay();
        c.lr_steps.clear();
        c
    }

    #[test]
    fn schedule() {
        let c = OptimizerConfig::adam(1e-4);
        assert_eq!(lr_at(0, &c), 1e-4);
        assert_eq!(lr_at(69_999, &c), 1e-4);
        assert!((lr_at(70_001, &c) - 1e-5).abs() < 1e-20);
        let mut flat = c.clone();
        flat.lr_steps.clear();
        assert_eq!(lr_at(10_000_000, &flat), 1e-4);
    }

    #[test]
    fn recommended_rates() {
        assert_eq!(OptimizerConfig::recommended(OptimizerKind::SgdMomentum, LossKind::Bce).learning_rate, 1e-4);
        assert_eq!(OptimizerConfig::recommended(OptimizerKind::SgdMomentum, LossKind::Cosine).learning_rate, 1e-2);
        assert_eq!(OptimizerConfig::recommended(OptimizerKind::Adam, LossKind::Cosine).learning_rate, 1e-4);
        let c = OptimizerConfig::sgd(0.1);
        assert_eq!((c.momentum, c.beta1, c.beta2, c.weight_decay), (0.9, 0.9, 0.999, 5e-5));
    }

    #[test]
    fn validation() {
        assert!(OptimizerConfig::sgd(0.0).validate().is_err());
        let mut c = OptimizerConfig::adam(1e-3);
        c.beta2 = 1.0;
        assert!(c.validate().is_err());
        assert!(OptimizerConfig::adam(1e-3).validate().is_ok());
    }

    #[test]
    fn sgd_zero_gradient_keeps_parameter() {
        let c = plain(OptimizerKind::SgdMomentum, 0.1);
        let mut w = vec![1.0, -2.0];
        let mut v = vec![0.0; 2];
        sgd_momentum_step(&mut w, &[0.0, 0.0], &mut v, 0.1, &c, true).unwrap();
        assert_eq!(w, vec![1.0, -2.0]);
    }

    #[test]
    fn sgd_without_momentum_is_gradient_descent() {
        let mut c = plain(OptimizerKind::SgdMomentum, 0.1);
        c.momentum = 0.0;
        let mut w = vec![1.0];
        let mut v = vec![0.0];
        for k in 1..=3 {
            sgd_momentum_step(&mut w, &[2.0], &mut v, 0.1, &c, true).unwrap();
            assert!((w[0] - (1.0 - 0.2 * k as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn sgd_two_momentum_steps() {
        let c = plain(OptimizerKind::SgdMomentum, 0.1);
        let mut w = vec![1.0];
        let mut v = vec![0.0];
        sgd_momentum_step(&mut w, &[0.5], &mut v, 0.1, &c, true).unwrap();
        sgd_momentum_step(&mut w, &[-1.0], &mut v, 0.1, &c, true).unwrap();
        // v1 = -0.05, w1 = 0.95; v2 = 0.9*(-0.05) + 0.1 = 0.055, w2 = 1.005
        assert!((v[0] - 0.055).abs() < 1e-15);
        assert!((w[0] - 1.005).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_only_when_requested() {
        let mut c = OptimizerConfig::sgd(0.1);
        c.momentum = 0.0;
        c.weight_decay = 0.5;
        let mut w = vec![2.0];
        let mut v = vec![0.0];
        sgd_momentum_step(&mut w, &[0.0], &mut v, 0.1, &c, false).unwrap();
        assert_eq!(w[0], 2.0);
        sgd_momentum_step(&mut w, &[0.0], &mut v, 0.1, &c, true).unwrap();
        assert!((w[0] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_learning_rate_sized() {
        let c = plain(OptimizerKind::Adam, 1e-3);
        let mut w = vec![0.0, 0.0];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_step(&mut w, &[0.3, -40.0], &mut m, &mut v, 1, 1e-3, &c, true).unwrap();
        assert!((w[0] + 1e-3).abs() < 1e-9);
        assert!((w[1] - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn adam_zero_gradient_is_fixed_point() {
        let c = plain(OptimizerKind::Adam, 1e-3);
        let mut w = vec![0.7];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        for t in 1..=20 {
            adam_step(&mut w, &[0.0], &mut m, &mut v, t, 1e-3, &c, true).unwrap();
        }
        assert_eq!(w[0], 0.7);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let c = plain(OptimizerKind::Adam, 1e-3);
        let mut w = vec![0.0; 2];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        assert!(adam_step(&mut w, &[1.0], &mut m, &mut v, 1, 1e-3, &c, true).is_err());
        let mut vel = vec![0.0; 3];
        assert!(sgd_momentum_step(&mut w, &[1.0, 1.0], &mut vel, 1e-3, &c, true).is_err());
    }
}
