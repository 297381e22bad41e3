use std::ops::Range;

use crate::clip::shard::shard_ranges;
use crate::clip::Granularity;
use crate::error::{Error, Result};
use crate::models::ParamSet;

/// What a clipping unit addresses inside a `ParamSet`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum UnitTarget {
    /// Every element of every tensor.
    All,
    /// One whole parameter tensor (by entry index).
    Param(usize),
    /// A flat-index slice of one parameter tensor.
    Shard(usize, Range<usize>),
}

/// The clipping units derived from a parameter layout and granularity.
/// Frozen on the first processed step; later steps must match.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct UnitLayout {
    pub params: Vec<(String, Vec<usize>)>,
    pub units: Vec<(String, UnitTarget)>,
}

impl UnitLayout {
    pub fn build(grads: &ParamSet, granularity: &Granularity) -> Result<Self> {
        if grads.total_len() == 0 {
            return Err(Error::InvalidArgument(
                "cannot derive clipping units from an element-free gradient set".into(),
            ));
        }
        let params: Vec<(String, Vec<usize>)> = grads
            .iter()
            .map(|(n, t)| (n.to_owned(), t.shape().to_vec()))
            .collect();
        let mut units = Vec::new();
        match granularity {
            Granularity::Global => units.push(("model".to_owned(), UnitTarget::All)),
            Granularity::PerParameter => {
                for (i, (name, _)) in params.iter().enumerate() {
                    units.push((name.clone(), UnitTarget::Param(i)));
                }
            }
            Granularity::PerShard { shards_per_param } => {
                for (i, (name, _)) in params.iter().enumerate() {
                    let len = grads.get(name).expect("same set").len();
                    for (k, range) in shard_ranges(len, *shards_per_param)?
                        .into_iter()
                        .enumerate()
                    {
                        units.push((format!("{name}.s{k}"), UnitTarget::Shard(i, range)));
                    }
                }
            }
        }
        Ok(UnitLayout { params, units })
    }

    /// Error unless `grads` has exactly the layout this state was built on.
    pub fn check(&self, grads: &ParamSet) -> Result<()> {
        let ok = grads.len() == self.params.len()
            && grads
                .iter()
                .zip(&self.params)
                .all(|((n, t), (pn, ps))| n == pn && t.shape() == ps.as_slice());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "gradient layout changed between clipping steps".into(),
            ))
        }
    }

    /// Norm of one unit. Accumulation always runs in entry order so the
    /// whole-model unit is bitwise identical to a single tensor's norm.
    pub fn norm(&self, grads: &ParamSet, target: &UnitTarget) -> f64 {
        let mut acc = 0.0;
        match target {
            UnitTarget::All => {
                for (_, t) in grads.iter() {
                    for x in t.data() {
                        acc += x * x;
                    }
                }
            }
            UnitTarget::Param(i) => {
                let name = &self.params[*i].0;
                for x in grads.get(name).expect("layout checked").data() {
                    acc += x * x;
                }
            }
            UnitTarget::Shard(i, range) => {
                let name = &self.params[*i].0;
                for x in &grads.get(name).expect("layout checked").data()[range.clone()] {
                    acc += x * x;
                }
            }
        }
        acc.sqrt()
    }

    /// Scale one unit in place. `h == 1` leaves bits untouched.
    pub fn scale(&self, grads: &mut ParamSet, target: &UnitTarget, h: f64) {
        if h == 1.0 {
            return;
        }
        match target {
            UnitTarget::All => {
                for (_, t) in grads.iter_mut() {
                    for x in t.data_mut() {
                        *x *= h;
                    }
                }
            }
            UnitTarget::Param(i) => {
                let name = self.params[*i].0.clone();
                for x in grads.tensor_mut(&name).expect("layout checked").data_mut() {
                    *x *= h;
                }
            }
            UnitTarget::Shard(i, range) => {
                let name = self.params[*i].0.clone();
                for x in &mut grads.tensor_mut(&name).expect("layout checked").data_mut()
                    [range.clone()]
                {
                    *x *= h;
                }
            }
        }
    }
}

/// Evolving state of the adaptive clipper: processed-step count plus one
/// threshold per clipping unit. Fresh states carry no layout; it is
/// frozen from the first gradient set seen.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClipState {
    pub(crate) step: u64,
    pub(crate) layout: Option<UnitLayout>,
    pub(crate) gammas: Vec<f64>,
}

impl ClipState {
    pub fn new() -> Self {
        ClipState::default()
    }

    /// Number of steps processed so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// True once thresholds exist (after the first processed step).
    pub fn is_initialized(&self) -> bool {
        !self.gammas.is_empty()
    }

    /// Current `(unit label, threshold)` pairs in unit order.
    pub fn gammas(&self) -> impl Iterator<Item = (&str, f64)> {
        self.layout
            .iter()
            .flat_map(|l| l.units.iter())
            .map(|(label, _)| label.as_str())
            .zip(self.gammas.iter().copied())
    }

    /// Threshold for one unit label, if tracked.
    pub fn gamma(&self, unit: &str) -> Option<f64> {
        self.gammas().find(|(l, _)| *l == unit).map(|(_, g)| g)
    }
}
