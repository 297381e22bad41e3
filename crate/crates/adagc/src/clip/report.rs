use serde::{Deserialize, Serialize};

/// Which regime a stateful clipping step ran in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Warmup,
    Adaptive,
}

/// Per-unit observation from one clipping step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitReport {
    /// Unit label: parameter name, `"<param>.s<k>"` for shards, or
    /// `"model"` for the whole-model unit.
    pub unit: String,
    pub pre_norm: f64,
    /// Applied scale factor, always in (0, 1].
    pub h: f64,
    /// Norm of the unit after scaling (recomputed, not `h·pre_norm`).
    pub post_norm: f64,
    /// Threshold in force before this step (None when stateless or on
    /// the very first tracked step).
    pub gamma_before: Option<f64>,
    /// Threshold after this step's update (None when stateless).
    pub gamma_after: Option<f64>,
    pub clipped: bool,
}

/// Everything observable about one pass through the clip stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipReport {
    /// 1-based step index for stateful clippers; 0 for one-shot calls.
    pub step: u64,
    /// Present only for the adaptive clipper.
    pub phase: Option<Phase>,
    pub units: Vec<UnitReport>,
}

impl ClipReport {
    /// True if any unit was actually scaled down.
    pub fn any_clipped(&self) -> bool {
        self.units.iter().any(|u| u.clipped)
    }

    pub fn unit(&self, label: &str) -> Option<&UnitReport> {
        self.units.iter().find(|u| u.unit == label)
    }
}
