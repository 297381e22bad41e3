//! Toy differentiable models and the parameter containers they share.
//!
//! Everything downstream (clipping, optimizers, the harness) works on a
//! [`ParamSet`]: an ordered collection of named tensors. Order is part of
//! the contract — clipping units, log columns, and optimizer state all
//! follow the declaration order of the model.

mod mlp;
mod quadratic;
mod rosenbrock;
mod synthetic;

pub use mlp::Mlp;
pub use quadratic::QuadraticBowl;
pub use rosenbrock::Rosenbrock2d;
pub use synthetic::{synthetic_batch, SyntheticData};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Ordered, name-addressable set of tensors (parameters or gradients).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    /// Build from `(name, tensor)` pairs, rejecting duplicate names.
    pub fn from_entries(entries: Vec<(String, Tensor)>) -> Result<Self> {
        let mut ps = ParamSet::new();
        for (name, t) in entries {
            ps.push(name, t)?;
        }
        Ok(ps)
    }

    /// Append a named tensor; duplicate names are an error.
    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter name '{name}'"
            )));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Total element count across all tensors.
    pub fn total_len(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// True when `other` has the same names, order, and shapes.
    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((an, at), (bn, bt))| an == bn && at.shape() == bt.shape())
    }

    /// Norm of the concatenation of all tensors (sum of squares across
    /// entries in declaration order). Errors on an element-free set.
    pub fn global_norm(&self) -> Result<f64> {
        if self.total_len() == 0 {
            return Err(Error::InvalidArgument(
                "global norm of an element-free parameter set".into(),
            ));
        }
        let mut acc = 0.0;
        for (_, t) in &self.entries {
            for x in t.data() {
                acc += x * x;
            }
        }
        Ok(acc.sqrt())
    }

    /// Name of the first tensor containing a NaN/Inf, if any.
    pub fn nonfinite_param(&self) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, t)| t.has_nonfinite())
            .map(|(n, _)| n.as_str())
    }

    /// Same-layout set with every tensor zeroed.
    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape().to_vec())))
                .collect(),
        }
    }
}

/// A minibatch: `inputs` shaped `[batch, d_in]`, `targets` `[batch, d_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Tensor,
    pub targets: Tensor,
}

impl Batch {
    /// Placeholder batch for models that ignore data (bowl, Rosenbrock).
    pub fn empty() -> Self {
        Batch {
            inputs: Tensor::zeros(vec![0, 0]),
            targets: Tensor::zeros(vec![0, 0]),
        }
    }
}

/// A differentiable objective: initial parameters plus a pure
/// `(params, batch) → (loss, gradients)` evaluation.
pub trait Model: Send + Sync {
    /// Initial parameter values (also defines the canonical layout).
    fn params(&self) -> &ParamSet;

    /// Loss and gradient at `params`. Must not retain state between calls.
    fn evaluate(&self, params: &ParamSet, batch: &Batch) -> Result<(f64, ParamSet)>;

    /// Input feature count, or 0 for models that take no batches.
    fn input_dim(&self) -> usize {
        0
    }

    /// Target dimension, or 0 for models that take no batches.
    fn target_dim(&self) -> usize {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_rejects_duplicates() {
        let mut ps = ParamSet::new();
        ps.push("w", Tensor::from_vec(vec![1.0])).unwrap();
        assert!(ps.push("w", Tensor::from_vec(vec![2.0])).is_err());
    }

    #[test]
    fn global_norm_concatenates_tensors() {
        // Norms 3 and 4 concatenate to 5.
        let ps = ParamSet::from_entries(vec![
            ("a".into(), Tensor::from_vec(vec![3.0])),
            ("b".into(), Tensor::from_vec(vec![4.0])),
        ])
        .unwrap();
        assert_eq!(ps.global_norm().unwrap(), 5.0);
    }

    #[test]
    fn global_norm_requires_elements() {
        assert!(ParamSet::new().global_norm().is_err());
        let ps =
            ParamSet::from_entries(vec![("a".into(), Tensor::zeros(vec![0]))]).unwrap();
        assert!(ps.global_norm().is_err());
    }

    #[test]
    fn nonfinite_param_names_first_offender() {
        let ps = ParamSet::from_entries(vec![
            ("ok".into(), Tensor::from_vec(vec![1.0])),
            ("bad".into(), Tensor::from_vec(vec![f64::NAN])),
        ])
        .unwrap();
        assert_eq!(ps.nonfinite_param(), Some("bad"));
    }

    #[test]
    fn layout_comparison_checks_names_order_shapes() {
        let a = ParamSet::from_entries(vec![
            ("x".into(), Tensor::zeros(vec![2])),
            ("y".into(), Tensor::zeros(vec![3])),
        ])
        .unwrap();
        let mut b = a.clone();
        assert!(a.same_layout(&b));
        b.tensor_mut("y").unwrap().data_mut()[0] = 9.0;
        assert!(a.same_layout(&b), "values do not affect layout");
        let c = ParamSet::from_entries(vec![
            ("y".into(), Tensor::zeros(vec![3])),
            ("x".into(), Tensor::zeros(vec![2])),
        ])
        .unwrap();
        assert!(!a.same_layout(&c), "order matters");
    }
}
