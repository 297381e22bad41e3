use serde::{Deserialize, Serialize};

use crate::clip::{ClipConfig, ClipReport, ClipStage};
use crate::error::{Error, Result};
use crate::models::{Batch, Model, ParamSet};
use crate::optim::{
    adamw_step, lion_step, stable_adamw_step, AdamWConfig, LionConfig, LrSchedule, OptimizerKind,
    OptimizerState,
};

/// Optimizer choice plus its hyperparameters. StableAdamW shares the
/// AdamW parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OptimizerConfig {
    #[serde(rename = "adamw")]
    AdamW(AdamWConfig),
    #[serde(rename = "lion")]
    Lion(LionConfig),
    #[serde(rename = "stable_adamw")]
    StableAdamW(AdamWConfig),
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::AdamW(AdamWConfig::default())
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerConfig::AdamW(c) | OptimizerConfig::StableAdamW(c) => c.validate(),
            OptimizerConfig::Lion(c) => c.validate(),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            OptimizerConfig::AdamW(_) => OptimizerKind::AdamW,
            OptimizerConfig::Lion(_) => OptimizerKind::Lion,
            OptimizerConfig::StableAdamW(_) => OptimizerKind::StableAdamW,
        }
    }

    /// Base learning rate before the schedule.
    pub fn base_alpha(&self) -> f64 {
        match self {
            OptimizerConfig::AdamW(c) | OptimizerConfig::StableAdamW(c) => c.alpha,
            OptimizerConfig::Lion(c) => c.alpha,
        }
    }
}

/// Everything that advances during a training run: parameters, the
/// clipping stage, the optimizer moments, and a skip counter for
/// non-finite batches.
#[derive(Debug, Clone)]
pub struct TrainState {
    params: ParamSet,
    clip: ClipStage,
    opt: OptimizerState,
    skipped: u64,
}

impl TrainState {
    pub fn new(model: &dyn Model, clip: ClipConfig, optimizer: &OptimizerConfig) -> Result<Self> {
        TrainState::with_params(model.params().clone(), clip, optimizer)
    }

    /// Build a state around explicit initial parameters, for runs that
    /// are not backed by a [`Model`] (e.g. replayed gradient streams).
    pub fn with_params(
        params: ParamSet,
        clip: ClipConfig,
        optimizer: &OptimizerConfig,
    ) -> Result<Self> {
        optimizer.validate()?;
        Ok(TrainState {
            clip: ClipStage::new(clip)?,
            opt: OptimizerState::new(optimizer.kind(), &params),
            params,
            skipped: 0,
        })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn clip(&self) -> &ClipStage {
        &self.clip
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.opt
    }

    /// Successfully completed steps (skips excluded).
    pub fn steps_taken(&self) -> u64 {
        self.opt.t()
    }

    /// Steps abandoned because the batch produced non-finite values.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }
}

/// What one call to [`run_step`] did.
#[derive(Debug, Clone)]
pub enum StepOutcome {
    /// The full pipeline ran: gradients were finite, clipping and the
    /// optimizer advanced. `loss` is `None` when the step had no finite
    /// loss attached (open-loop gradient sources).
    Stepped {
        loss: Option<f64>,
        lr: f64,
        report: ClipReport,
    },
    /// The batch produced a non-finite loss or gradient; no state moved
    /// except the skip counter. `loss` is the finite loss value if there
    /// was one.
    Skipped { loss: Option<f64>, reason: String },
}

impl StepOutcome {
    pub fn is_skipped(&self) -> bool {
        matches!(self, StepOutcome::Skipped { .. })
    }
}

/// One full training step: evaluate → clip → optimize.
///
/// All state advances atomically — if any stage fails, `state` is
/// exactly as it was. Non-finite losses or gradients do not fail the
/// call; they return [`StepOutcome::Skipped`] and bump the skip
/// counter, leaving parameters, moments, thresholds, and step counters
/// untouched (so schedules see only real progress).
pub fn run_step(
    state: &mut TrainState,
    optimizer: &OptimizerConfig,
    schedule: &LrSchedule,
    model: &dyn Model,
    batch: &Batch,
) -> Result<StepOutcome> {
    optimizer.validate()?;
    schedule.validate()?;

    let (loss, grads) = model.evaluate(&state.params, batch)?;
    if let Some(name) = grads.nonfinite_param() {
        state.skipped += 1;
        return Ok(StepOutcome::Skipped {
            loss: loss.is_finite().then_some(loss),
            reason: format!("non-finite gradient in `{name}`"),
        });
    }
    if !loss.is_finite() {
        state.skipped += 1;
        return Ok(StepOutcome::Skipped {
            loss: None,
            reason: "non-finite loss".into(),
        });
    }
    advance(state, optimizer, schedule, Some(loss), &grads)
}

/// Like [`run_step`], but with gradients supplied by the caller instead
/// of a model — the entry point for replayed traces and synthetic
/// gradient streams. `loss` is an optional readout recorded alongside
/// the step; unlike [`run_step`], a non-finite readout does not skip
/// the step (the gradients are the data here), it is just dropped from
/// the outcome.
pub fn run_step_open_loop(
    state: &mut TrainState,
    optimizer: &OptimizerConfig,
    schedule: &LrSchedule,
    loss: Option<f64>,
    grads: &ParamSet,
) -> Result<StepOutcome> {
    optimizer.validate()?;
    schedule.validate()?;

    if let Some(name) = grads.nonfinite_param() {
        state.skipped += 1;
        return Ok(StepOutcome::Skipped {
            loss: loss.filter(|l| l.is_finite()),
            reason: format!("non-finite gradient in `{name}`"),
        });
    }
    advance(state, optimizer, schedule, loss.filter(|l| l.is_finite()), grads)
}

fn advance(
    state: &mut TrainState,
    optimizer: &OptimizerConfig,
    schedule: &LrSchedule,
    loss: Option<f64>,
    grads: &ParamSet,
) -> Result<StepOutcome> {
    let t = state.opt.t() + 1;
    let lr = schedule.lr_at(optimizer.base_alpha(), t);
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::Config(format!(
            "schedule produced learning rate {lr} at step {t}; must be positive"
        )));
    }

    // Clip on a scratch copy of the stage so an optimizer failure
    // cannot leave the clipper advanced but the moments behind.
    let mut clip = state.clip.clone();
    let (clipped, report) = clip.step(grads, Some(&state.params))?;
    let (opt, params) = match optimizer {
        OptimizerConfig::AdamW(cfg) => adamw_step(&state.opt, &state.params, &clipped, cfg, lr)?,
        OptimizerConfig::Lion(cfg) => lion_step(&state.opt, &state.params, &clipped, cfg, lr)?,
        OptimizerConfig::StableAdamW(cfg) => {
            stable_adamw_step(&state.opt, &state.params, &clipped, cfg, lr)?
        }
    };
    state.clip = clip;
    state.opt = opt;
    state.params = params;
    Ok(StepOutcome::Stepped { loss, lr, report })
}
