use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ParamSet;
use crate::optim::{OptimizerKind, OptimizerState};

/// Lion hyperparameters. The sign update makes every coordinate move
/// by exactly ±α_t (or not at all), so `alpha` runs about an order of
/// magnitude below typical AdamW rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LionConfig {
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    /// Interpolation weight for the update direction `c`.
    #[serde(default = "defaults::beta1")]
    pub beta1: f64,
    /// Momentum retention for the stored state.
    #[serde(default = "defaults::beta2")]
    pub beta2: f64,
    #[serde(default = "defaults::weight_decay")]
    pub weight_decay: f64,
}

impl Default for LionConfig {
    fn default() -> Self {
        LionConfig {
            alpha: defaults::alpha(),
            beta1: defaults::beta1(),
            beta2: defaults::beta2(),
            weight_decay: defaults::weight_decay(),
        }
    }
}

impl LionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!(
                "alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::Config(format!(
                    "{name} must lie in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::Config(format!(
                "weight_decay must be non-negative and finite, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Sign with `sign(±0) = 0`, unlike `f64::signum` which maps ±0 to ±1.
/// A zero update direction must leave the parameter alone (decay aside).
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One Lion step:
/// `c = β₁·m + (1−β₁)·ĝ; θ ← θ·(1−α_t·λ_w) − α_t·sign(c);
/// m ← β₂·m + (1−β₂)·ĝ`.
///
/// Note the asymmetry: the update direction blends with `β₁` but the
/// stored momentum decays with `β₂`.
pub fn lion_step(
    state: &OptimizerState,
    params: &ParamSet,
    grads_hat: &ParamSet,
    cfg: &LionConfig,
    alpha_t: f64,
) -> Result<(OptimizerState, ParamSet)> {
    cfg.validate()?;
    state.check_step_inputs(OptimizerKind::Lion, params, grads_hat, alpha_t)?;

    let mut next = state.clone();
    let decay = 1.0 - alpha_t * cfg.weight_decay;
    let mut out = params.clone();
    for (((_, theta), (_, m)), (_, g)) in
        out.iter_mut().zip(next.m.iter_mut()).zip(grads_hat.iter())
    {
        for ((tj, mj), gj) in theta.data_mut().iter_mut().zip(m.data_mut()).zip(g.data()) {
            let c = cfg.beta1 * *mj + (1.0 - cfg.beta1) * *gj;
            *tj = *tj * decay - alpha_t * sign(c);
            *mj = cfg.beta2 * *mj + (1.0 - cfg.beta2) * *gj;
        }
    }
    next.t += 1;
    Ok((next, out))
}

pub(crate) mod defaults {
    pub fn alpha() -> f64 {
        1e-4
    }
    pub fn beta1() -> f64 {
        0.9
    }
    pub fn beta2() -> f64 {
        0.99
    }
    pub fn weight_decay() -> f64 {
        0.0
    }
}
