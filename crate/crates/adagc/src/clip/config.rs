use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which clipping rule the pipeline applies before the optimizer.
///
/// Serialized externally tagged, e.g. `"none"`, `{"global":{...}}`,
/// `{"adagc":{...}}`, `{"agc":{...}}`; every payload rejects unknown keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    /// Pass gradients through untouched (norms are still reported).
    #[default]
    None,
    /// Clip the concatenated global norm to `lambda_abs`.
    Global(GlobalParams),
    /// Adaptive clipping against per-unit EMA thresholds.
    Adagc(AdagcParams),
    /// Clip against parameter norms (adaptive gradient clipping of the
    /// unit-norm-ratio family), stateless baseline.
    Agc(AgcParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalParams {
    #[serde(default = "defaults::lambda_abs")]
    pub lambda_abs: f64,
}

impl Default for GlobalParams {
    fn default() -> Self {
        GlobalParams {
            lambda_abs: defaults::lambda_abs(),
        }
    }
}

/// Adaptive-clipping hyperparameters.
///
/// During warm-up (steps `1..t_start`) gradients are globally clipped to
/// `lambda_abs_warmup` while per-unit thresholds initialize according to
/// `init`; from step `t_start` on, each unit `i` is clipped to
/// `h = min(lambda_rel·γ_i/‖g_i‖, 1)` and `γ_i` tracks an EMA of the
/// observed norms (post-clip by default, raw behind the `ema` switch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdagcParams {
    #[serde(default = "defaults::lambda_rel")]
    pub lambda_rel: f64,
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default = "defaults::t_start")]
    pub t_start: u64,
    #[serde(default = "defaults::lambda_abs")]
    pub lambda_abs_warmup: f64,
    #[serde(default)]
    pub init: InitStrategy,
    #[serde(default)]
    pub ema: EmaSource,
}

impl Default for AdagcParams {
    fn default() -> Self {
        AdagcParams {
            lambda_rel: defaults::lambda_rel(),
            beta: defaults::beta(),
            t_start: defaults::t_start(),
            lambda_abs_warmup: defaults::lambda_abs(),
            init: InitStrategy::default(),
            ema: EmaSource::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgcParams {
    #[serde(default = "defaults::lambda_agc")]
    pub lambda_agc: f64,
    #[serde(default = "defaults::eps_agc")]
    pub eps_agc: f64,
}

impl Default for AgcParams {
    fn default() -> Self {
        AgcParams {
            lambda_agc: defaults::lambda_agc(),
            eps_agc: defaults::eps_agc(),
        }
    }
}

/// How per-unit thresholds come to life before the adaptive phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Default: globally clip during warm-up and track the running
    /// minimum of post-clip unit norms.
    #[default]
    WarmupMinTrack,
    /// Track the running minimum of raw norms; no warm-up clipping.
    MinTrackNoWarmup,
    /// Fix every threshold to a constant; pairs with `t_start: 0` for an
    /// immediately-adaptive run.
    Constant { value: f64 },
    /// Running minimum capped from above; no warm-up clipping.
    ThresholdedMin { cap: f64 },
}

impl InitStrategy {
    /// Whether this strategy needs warm-up steps to produce a threshold.
    pub fn needs_warmup(&self) -> bool {
        !matches!(self, InitStrategy::Constant { .. })
    }

    /// Whether warm-up steps apply the global clip.
    pub(crate) fn clips_during_warmup(&self) -> bool {
        matches!(
            self,
            InitStrategy::WarmupMinTrack | InitStrategy::Constant { .. }
        )
    }
}

/// Which norm feeds the threshold EMA in the adaptive phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmaSource {
    /// Post-clip norm (the default; keeps thresholds bounded).
    #[default]
    PostClip,
    /// Raw pre-clip norm (ablation switch).
    RawNorm,
}

/// What a "clipping unit" is: the whole model, one parameter tensor, or
/// equal contiguous shards of each parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Global,
    #[default]
    PerParameter,
    PerShard { shards_per_param: usize },
}

/// Clip stage configuration: the rule plus the unit granularity.
/// Granularity affects the adaptive and pass-through modes; the global
/// baseline is global and the parameter-norm baseline per-parameter by
/// definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ClipConfig {
    #[serde(default)]
    pub mode: ClipMode,
    #[serde(default)]
    pub granularity: Granularity,
}

impl ClipConfig {
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        }
        match &self.mode {
            ClipMode::None => {}
            ClipMode::Global(p) => positive("lambda_abs", p.lambda_abs)?,
            ClipMode::Agc(p) => {
                positive("lambda_agc", p.lambda_agc)?;
                positive("eps_agc", p.eps_agc)?;
            }
            ClipMode::Adagc(p) => {
                positive("lambda_rel", p.lambda_rel)?;
                positive("lambda_abs_warmup", p.lambda_abs_warmup)?;
                if !(p.beta > 0.0 && p.beta < 1.0) {
                    return Err(Error::Config(format!(
                        "beta must lie in (0, 1), got {}",
                        p.beta
                    )));
                }
                match &p.init {
                    InitStrategy::Constant { value } => positive("constant init value", *value)?,
                    InitStrategy::ThresholdedMin { cap } => positive("threshold cap", *cap)?,
                    _ => {}
                }
                if p.init.needs_warmup() && p.t_start < 2 {
                    return Err(Error::Config(format!(
                        "t_start = {} leaves no warm-up steps to initialize thresholds; \
                         use the constant init strategy or t_start >= 2",
                        p.t_start
                    )));
                }
            }
        }
        if let Granularity::PerShard { shards_per_param } = self.granularity {
            if shards_per_param == 0 {
                return Err(Error::Config("shards_per_param must be at least 1".into()));
            }
        }
        Ok(())
    }
}

mod defaults {
    pub fn lambda_rel() -> f64 {
        1.05
    }
    pub fn beta() -> f64 {
        0.98
    }
    pub fn t_start() -> u64 {
        100
    }
    pub fn lambda_abs() -> f64 {
        1.0
    }
    pub fn lambda_agc() -> f64 {
        0.01
    }
    pub fn eps_agc() -> f64 {
        1e-3
    }
}
