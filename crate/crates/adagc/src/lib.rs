//! Adaptive gradient clipping for stochastic optimization, with the
//! training apparatus needed to study it: deterministic models and
//! gradient streams, AdamW-family optimizers, and an experiment
//! harness that logs every run reproducibly.
//!
//! The core idea: instead of clipping gradients against one fixed
//! global threshold, give every unit (a tensor, a shard of one, or the
//! whole model) its own threshold `γ` that tracks an exponential moving
//! average of that unit's recent gradient norms. A sudden spike is then
//! measured against the unit's own history — `h = min(λ·γ/‖g‖, 1)` —
//! so late-training spikes get suppressed even after typical norms have
//! decayed far below any sensible fixed threshold, and calm units are
//! never touched.
//!
//! ```
//! use adagc::clip::{AdagcParams, ClipConfig, ClipMode, ClipStage, Granularity, InitStrategy};
//! use adagc::models::ParamSet;
//! use adagc::numerics::Tensor;
//!
//! let cfg = ClipConfig {
//!     mode: ClipMode::Adagc(AdagcParams {
//!         t_start: 0,
//!         init: InitStrategy::Constant { value: 1.0 },
//!         ..AdagcParams::default()
//!     }),
//!     granularity: Granularity::PerParameter,
//! };
//! let mut stage = ClipStage::new(cfg)?;
//! let grads = ParamSet::from_entries(vec![
//!     ("w".into(), Tensor::from_vec(vec![30.0, 40.0])), // norm 50: a spike
//! ])?;
//! let (clipped, report) = stage.step(&grads, None)?;
//! assert!(report.unit("w").unwrap().clipped);
//! assert!(clipped.get("w").unwrap().l2_norm()? <= 1.05 * 1.0 + 1e-12);
//! # Ok::<(), adagc::Error>(())
//! ```

// Validators use `!(x > 0.0)` on purpose: unlike `x <= 0.0`, the negated
// form also catches NaN, which must always fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod clip;
pub mod error;
pub mod harness;
pub mod models;
pub mod numerics;
pub mod optim;
pub mod stream;

pub use error::{Error, Result};
