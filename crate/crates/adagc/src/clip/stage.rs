use crate::clip::state::UnitLayout;
use crate::clip::{
    adagc_step, agc_clip, global_clip, ClipConfig, ClipMode, ClipReport, ClipState, UnitReport,
};
use crate::error::{Error, Result};
use crate::models::ParamSet;

/// Stateful front door for gradient clipping. Owns the configuration
/// and whatever running state the mode needs, so a training loop can
/// call [`ClipStage::step`] once per iteration without caring which
/// strategy is active.
///
/// A failed step (non-finite gradient, layout change) leaves the stage
/// untouched; the caller can skip the batch and try the next one.
#[derive(Debug, Clone)]
pub struct ClipStage {
    cfg: ClipConfig,
    state: ClipState,
}

impl ClipStage {
    pub fn new(cfg: ClipConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            state: ClipState::new(),
        })
    }

    pub fn config(&self) -> &ClipConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ClipState {
        &self.state
    }

    /// Current threshold for a unit, if the mode tracks one.
    pub fn gamma(&self, unit: &str) -> Option<f64> {
        self.state.gamma(unit)
    }

    /// Number of completed steps.
    pub fn steps_taken(&self) -> u64 {
        self.state.step()
    }

    /// Clip one gradient set. `params` is only consulted by modes that
    /// need the current weights (parameter-norm-ratio clipping).
    pub fn step(
        &mut self,
        grads: &ParamSet,
        params: Option<&ParamSet>,
    ) -> Result<(ParamSet, ClipReport)> {
        match &self.cfg.mode {
            ClipMode::None => self.passthrough(grads),
            ClipMode::Global(p) => {
                let (out, mut report) = global_clip(grads, p.lambda_abs)?;
                self.state.step += 1;
                report.step = self.state.step;
                Ok((out, report))
            }
            ClipMode::Agc(p) => {
                let params = params.ok_or_else(|| {
                    Error::InvalidArgument(
                        "agc clipping needs the current parameters".into(),
                    )
                })?;
                let (out, mut report) = agc_clip(grads, params, p.lambda_agc, p.eps_agc)?;
                self.state.step += 1;
                report.step = self.state.step;
                Ok((out, report))
            }
            ClipMode::Adagc(_) => {
                let (out, next, report) = adagc_step(&self.state, grads, &self.cfg)?;
                self.state = next;
                Ok((out, report))
            }
        }
    }

    /// `ClipMode::None`: gradients pass through bit-for-bit, but the
    /// report still carries per-unit norms at the configured
    /// granularity so disabled-clipping runs stay comparable.
    fn passthrough(&mut self, grads: &ParamSet) -> Result<(ParamSet, ClipReport)> {
        if let Some(name) = grads.nonfinite_param() {
            return Err(Error::NonFiniteGradient(name.to_owned()));
        }
        let mut next = self.state.clone();
        match &next.layout {
            None => next.layout = Some(UnitLayout::build(grads, &self.cfg.granularity)?),
            Some(layout) => layout.check(grads)?,
        }
        let layout = next.layout.clone().expect("set above");
        let units = layout
            .units
            .iter()
            .map(|(label, target)| {
                let n = layout.norm(grads, target);
                UnitReport {
                    unit: label.clone(),
                    pre_norm: n,
                    h: 1.0,
                    post_norm: n,
                    gamma_before: None,
                    gamma_after: None,
                    clipped: false,
                }
            })
            .collect();
        next.step += 1;
        let report = ClipReport {
            step: next.step,
            phase: None,
            units,
        };
        self.state = next;
        Ok((grads.clone(), report))
    }
}
