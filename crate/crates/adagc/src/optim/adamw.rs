use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ParamSet;
use crate::optim::{debias_weight, OptimizerKind, OptimizerState};

/// AdamW hyperparameters. Also drives StableAdamW, which reuses the
/// same moments and adds per-tensor update-RMS clamping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamWConfig {
    /// Base learning rate, before any schedule.
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default = "defaults::beta1")]
    pub beta1: f64,
    #[serde(default = "defaults::beta2")]
    pub beta2: f64,
    /// Denominator stabilizer ε added to `√v̂`.
    #[serde(default = "defaults::eps")]
    pub eps: f64,
    /// Decoupled weight decay λ_w; applied multiplicatively as
    /// `θ·(1−α_t·λ_w)` so decay-only trajectories are exact.
    #[serde(default = "defaults::weight_decay")]
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            alpha: defaults::alpha(),
            beta1: defaults::beta1(),
            beta2: defaults::beta2(),
            eps: defaults::eps(),
            weight_decay: defaults::weight_decay(),
        }
    }
}

impl AdamWConfig {
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
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Config(format!(
                "eps must be positive and finite, got {}",
                self.eps
            )));
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

/// Advance the bias-corrected moments in place for step `t`.
/// At `w == 1.0` (t=1, or β=0) the new observation is written through
/// directly, which keeps `m̂ = ĝ` and `v̂ = ĝ²` bitwise.
pub(crate) fn advance_moments(
    state: &mut OptimizerState,
    grads_hat: &ParamSet,
    beta1: f64,
    beta2: f64,
) {
    let t = state.t + 1;
    let w1 = debias_weight(beta1, t);
    let w2 = debias_weight(beta2, t);
    for ((_, m), (_, g)) in state.m.iter_mut().zip(grads_hat.iter()) {
        for (mj, gj) in m.data_mut().iter_mut().zip(g.data()) {
            *mj = if w1 == 1.0 {
                *gj
            } else {
                (1.0 - w1) * *mj + w1 * *gj
            };
        }
    }
    let v = state.v.as_mut().expect("second-moment state present");
    for ((_, v), (_, g)) in v.iter_mut().zip(grads_hat.iter()) {
        for (vj, gj) in v.data_mut().iter_mut().zip(g.data()) {
            *vj = if w2 == 1.0 {
                gj * gj
            } else {
                (1.0 - w2) * *vj + w2 * gj * gj
            };
        }
    }
    state.t = t;
}

/// One AdamW step at learning rate `alpha_t`:
/// `θ ← θ·(1−α_t·λ_w) − α_t·m̂/(√v̂ + ε)`.
///
/// Returns the advanced state and updated parameters; inputs are
/// untouched, and errors (non-finite gradients, layout mismatch) leave
/// nothing behind.
pub fn adamw_step(
    state: &OptimizerState,
    params: &ParamSet,
    grads_hat: &ParamSet,
    cfg: &AdamWConfig,
    alpha_t: f64,
) -> Result<(OptimizerState, ParamSet)> {
    cfg.validate()?;
    state.check_step_inputs(OptimizerKind::AdamW, params, grads_hat, alpha_t)?;

    let mut next = state.clone();
    advance_moments(&mut next, grads_hat, cfg.beta1, cfg.beta2);

    let decay = 1.0 - alpha_t * cfg.weight_decay;
    let mut out = params.clone();
    let v = next.v.as_ref().expect("second-moment state present");
    for (((_, theta), (_, m)), (_, v)) in out.iter_mut().zip(next.m.iter()).zip(v.iter()) {
        for ((tj, mj), vj) in theta.data_mut().iter_mut().zip(m.data()).zip(v.data()) {
            *tj = *tj * decay - alpha_t * (mj / (vj.sqrt() + cfg.eps));
        }
    }
    Ok((next, out))
}

pub(crate) mod defaults {
    pub fn alpha() -> f64 {
        3e-4
    }
    pub fn beta1() -> f64 {
        0.9
    }
    pub fn beta2() -> f64 {
        0.999
    }
    pub fn eps() -> f64 {
        1e-8
    }
    pub fn weight_decay() -> f64 {
        0.1
    }
}
