//! Optimizers that consume (possibly clipped) gradients: AdamW, Lion,
//! and StableAdamW, plus learning-rate schedules and the step pipeline
//! that chains model → clipper → optimizer.
//!
//! Each `*_step` function is pure: it takes the current state and
//! returns the advanced state alongside the updated parameters, so a
//! failed call cannot leave a half-updated run behind.

mod adamw;
mod lion;
mod pipeline;
mod schedule;
mod stable;

pub use adamw::{adamw_step, AdamWConfig};
pub use lion::{lion_step, LionConfig};
pub use pipeline::{run_step, run_step_open_loop, OptimizerConfig, StepOutcome, TrainState};
pub use schedule::LrSchedule;
pub use stable::stable_adamw_step;

use crate::error::{Error, Result};
use crate::models::ParamSet;

/// Which update rule an [`OptimizerState`] belongs to. Steps check the
/// tag so momentum buffers never cross between rules by accident.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    AdamW,
    Lion,
    StableAdamW,
}

impl OptimizerKind {
    fn tracks_second_moment(self) -> bool {
        !matches!(self, OptimizerKind::Lion)
    }
}

/// Moment accumulators plus the step counter.
///
/// `m` and `v` hold the *bias-corrected* first and second moments
/// (`m̂`, `v̂`): the recurrence `m̂ ← (1−w)·m̂ + w·ĝ` with
/// `w = (1−β)/(1−β^t)` is algebraically the classic
/// `m ← β·m + (1−β)·ĝ; m̂ = m/(1−β^t)` but keeps the t=1 identities
/// `m̂ = ĝ`, `v̂ = ĝ²` exact in floating point. The raw accumulator is
/// recoverable as `m̂·(1−β^t)`. Lion keeps a single momentum in `m`
/// and no `v`.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    t: u64,
    m: ParamSet,
    v: Option<ParamSet>,
}

impl OptimizerState {
    /// Fresh zeroed state shaped like `params`.
    pub fn new(kind: OptimizerKind, params: &ParamSet) -> Self {
        OptimizerState {
            kind,
            t: 0,
            m: params.zeros_like(),
            v: kind.tracks_second_moment().then(|| params.zeros_like()),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Completed steps.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Bias-corrected first moments (Lion: plain momentum).
    pub fn m(&self) -> &ParamSet {
        &self.m
    }

    /// Bias-corrected second moments; `None` for Lion.
    pub fn v(&self) -> Option<&ParamSet> {
        self.v.as_ref()
    }

    pub(crate) fn check_step_inputs(
        &self,
        expected: OptimizerKind,
        params: &ParamSet,
        grads_hat: &ParamSet,
        alpha_t: f64,
    ) -> Result<()> {
        if self.kind != expected {
            return Err(Error::InvalidArgument(format!(
                "state belongs to {:?}, not {expected:?}",
                self.kind
            )));
        }
        if !(alpha_t > 0.0) || !alpha_t.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive and finite, got {alpha_t}"
            )));
        }
        if !params.same_layout(grads_hat) || !self.m.same_layout(grads_hat) {
            return Err(Error::InvalidArgument(
                "parameter, gradient, and moment layouts do not match".into(),
            ));
        }
        if let Some(name) = grads_hat.nonfinite_param() {
            return Err(Error::NonFiniteGradient(name.to_owned()));
        }
        Ok(())
    }
}

/// Weight of the newest observation in the bias-corrected moment
/// recurrence: `(1−β)/(1−β^t)`. Exactly 1.0 at t=1, decaying toward
/// `1−β`.
pub(crate) fn debias_weight(beta: f64, t: u64) -> f64 {
    let exponent = i32::try_from(t).unwrap_or(i32::MAX);
    (1.0 - beta) / (1.0 - beta.powi(exponent))
}
