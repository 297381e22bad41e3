//! Gradient clipping: an adaptive per-unit strategy plus the usual
//! baselines, behind one stateful [`ClipStage`].
//!
//! The adaptive rule keeps an exponential moving average `γ` of each
//! unit's recent gradient norm and rescales by
//! `h = min(lambda_rel·γ/‖g‖, 1)`, so a unit whose gradient suddenly
//! jumps far above its own history gets pulled back while everything
//! else passes untouched. Units are the whole model, one tensor, or
//! contiguous shards of a tensor, depending on [`Granularity`].
//!
//! Baselines for comparison: [`global_clip`] (one absolute threshold on
//! the concatenated norm) and [`agc_clip`] (threshold proportional to
//! each tensor's weight norm).

mod adagc;
mod baselines;
mod config;
mod report;
mod shard;
mod stage;
pub(crate) mod state;

pub use adagc::adagc_step;
pub use baselines::{agc_clip, global_clip};
pub use config::{
    AdagcParams, AgcParams, ClipConfig, ClipMode, EmaSource, GlobalParams, Granularity,
    InitStrategy,
};
pub use report::{ClipReport, Phase, UnitReport};
pub use shard::shard_views;
pub use stage::ClipStage;
pub use state::ClipState;
