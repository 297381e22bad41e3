//! Synthetic gradient streams with controlled norm decay and spike
//! injection, plus trace record/replay.
//!
//! Real training produces gradient norms that drift downward over time
//! and occasionally spike several-fold without warning. [`gen_stream`]
//! reproduces that shape on demand: each parameter follows its own
//! norm schedule, each step's direction is freshly random, and
//! [`SpikeEvent`]s multiply chosen steps' norms. Feeding such a stream
//! through [`drive_clipper`] exercises a clipping strategy in
//! isolation — no model or optimizer in the loop — which is how the
//! fixed-threshold failure mode (a decayed stream spikes *under* the
//! old threshold's ceiling yet far above its own recent level) becomes
//! a unit-testable inequality.

mod trace;

pub use trace::{read_trace, Trace, TraceRecord, TracePayload, TraceWriter};

use serde::{Deserialize, Serialize};

use crate::clip::{ClipConfig, ClipReport, ClipStage};
use crate::error::{Error, Result};
use crate::models::ParamSet;
use crate::numerics::{Rng, Tensor};

/// Target norm as a function of the (1-based) step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormSchedule {
    /// `norm(t) = a·t^(−p) + c` — a decaying floor-limited profile.
    PowerDecay { a: f64, p: f64, c: f64 },
    Constant { c: f64 },
}

impl NormSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NormSchedule::PowerDecay { a, p, c } => {
                for (name, v) in [("a", a), ("p", p), ("c", c)] {
                    if !v.is_finite() {
                        return Err(Error::Config(format!("power_decay {name} must be finite")));
                    }
                }
                if a < 0.0 || p < 0.0 || c < 0.0 || a + c <= 0.0 {
                    return Err(Error::Config(format!(
                        "power_decay requires a, p, c ≥ 0 with a + c > 0; got a={a}, p={p}, c={c}"
                    )));
                }
                Ok(())
            }
            NormSchedule::Constant { c } => {
                if !(c > 0.0) || !c.is_finite() {
                    return Err(Error::Config(format!(
                        "constant schedule needs a positive finite norm, got {c}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Scheduled norm at step `t ≥ 1`; strictly positive for valid configs.
    pub fn norm_at(&self, t: u64) -> f64 {
        match *self {
            NormSchedule::PowerDecay { a, p, c } => a * (t as f64).powf(-p) + c,
            NormSchedule::Constant { c } => c,
        }
    }
}

/// One simulated parameter: its tensor shape and norm profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub schedule: NormSchedule,
}

/// Recipe for a deterministic gradient stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub params: Vec<StreamParam>,
    pub steps: u64,
    pub seed: u64,
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Config("stream needs at least one parameter".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("stream needs at least one step".into()));
        }
        for (i, p) in self.params.iter().enumerate() {
            if p.name.is_empty() {
                return Err(Error::Config(format!("parameter {i} has an empty name")));
            }
            if self.params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::Config(format!("duplicate parameter name `{}`", p.name)));
            }
            if p.shape.iter().product::<usize>() == 0 {
                return Err(Error::Config(format!(
                    "parameter `{}` has an element-free shape {:?}",
                    p.name, p.shape
                )));
            }
            p.schedule.validate()?;
        }
        Ok(())
    }
}

/// Which parameters a spike hits. Serializes as a plain string: the
/// reserved word `"all"` broadcasts, anything else names one parameter
/// (so `"all"` is not usable as a spike-targetable parameter name).
#[derive(Debug, Clone, PartialEq)]
pub enum SpikeTarget {
    All,
    Param(String),
}

impl Serialize for SpikeTarget {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SpikeTarget::All => serializer.serialize_str("all"),
            SpikeTarget::Param(name) => serializer.serialize_str(name),
        }
    }
}

impl<'de> Deserialize<'de> for SpikeTarget {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        Ok(if name == "all" {
            SpikeTarget::All
        } else {
            SpikeTarget::Param(name)
        })
    }
}

/// A multiplicative norm spike at one step. Stacked spikes at the same
/// (param, step) compose multiplicatively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeEvent {
    pub param: SpikeTarget,
    pub step: u64,
    pub factor: f64,
}

impl SpikeEvent {
    fn matches(&self, name: &str, step: u64) -> bool {
        step == self.step
            && match &self.param {
                SpikeTarget::All => true,
                SpikeTarget::Param(p) => p == name,
            }
    }
}

/// A materialized gradient sequence: one [`ParamSet`] per step, in
/// order. Produced by [`gen_stream`] or by replaying a recorded trace.
#[derive(Debug, Clone)]
pub struct GradStream {
    steps: Vec<ParamSet>,
}

impl GradStream {
    pub(crate) fn new(steps: Vec<ParamSet>) -> Self {
        GradStream { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Gradients for 1-based step `t`.
    pub fn step(&self, t: u64) -> Option<&ParamSet> {
        t.checked_sub(1).and_then(|i| self.steps.get(i as usize))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParamSet> {
        self.steps.iter()
    }

    pub fn into_steps(self) -> Vec<ParamSet> {
        self.steps
    }
}

/// Generate a deterministic gradient stream: at step `t` each
/// parameter gets a fresh uniformly random direction scaled to
/// `schedule(t)` times the product of all matching spike factors.
/// Equal `(cfg, spikes)` always yields a bitwise-equal stream.
pub fn gen_stream(cfg: &StreamConfig, spikes: &[SpikeEvent]) -> Result<GradStream> {
    cfg.validate()?;
    for (i, s) in spikes.iter().enumerate() {
        if s.step == 0 || s.step > cfg.steps {
            return Err(Error::Config(format!(
                "spike {i} lands on step {} outside 1..={}",
                s.step, cfg.steps
            )));
        }
        if !(s.factor > 1.0) || !s.factor.is_finite() {
            return Err(Error::Config(format!(
                "spike {i} needs a finite factor > 1, got {}",
                s.factor
            )));
        }
        if let SpikeTarget::Param(name) = &s.param {
            if !cfg.params.iter().any(|p| &p.name == name) {
                return Err(Error::Config(format!(
                    "spike {i} targets unknown parameter `{name}`"
                )));
            }
        }
    }

    let mut rng = Rng::new(cfg.seed);
    let mut steps = Vec::with_capacity(cfg.steps as usize);
    for t in 1..=cfg.steps {
        let mut entries = Vec::with_capacity(cfg.params.len());
        for p in &cfg.params {
            let n: usize = p.shape.iter().product();
            let mut dir;
            let mut norm;
            loop {
                dir = rng.normals(n);
                norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
                // A zero draw has probability ~0 but would break the
                // normalization; redraw rather than emit garbage.
                if norm > 0.0 {
                    break;
                }
            }
            let mut target = p.schedule.norm_at(t);
            for s in spikes {
                if s.matches(&p.name, t) {
                    target *= s.factor;
                }
            }
            let scale = target / norm;
            for x in &mut dir {
                *x *= scale;
            }
            entries.push((p.name.clone(), Tensor::new(p.shape.clone(), dir)?));
        }
        steps.push(ParamSet::from_entries(entries)?);
    }
    Ok(GradStream::new(steps))
}

/// Feed a stream through a clipping stage alone — no optimizer — and
/// collect the per-step reports. Threshold dynamics are identical to a
/// full training run seeing the same gradients. Modes that need
/// parameter values (weight-norm-ratio clipping) are rejected.
pub fn drive_clipper(stream: &GradStream, cfg: &ClipConfig) -> Result<Vec<ClipReport>> {
    let mut stage = ClipStage::new(cfg.clone())?;
    let mut reports = Vec::with_capacity(stream.len());
    for grads in stream.iter() {
        let (_, report) = stage.step(grads, None)?;
        reports.push(report);
    }
    Ok(reports)
}
