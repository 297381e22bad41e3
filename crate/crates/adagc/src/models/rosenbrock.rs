use crate::error::{Error, Result};
use crate::models::{Batch, Model, ParamSet};
use crate::numerics::Tensor;

/// The 2-d Rosenbrock valley `f(x, y) = (1−x)² + 100(y−x²)²`.
///
/// Single parameter `"xy"` of shape `[2]`, starting at the classic
/// `(−1.2, 1.0)` unless overridden. Minimum `f = 0` at `(1, 1)`.
#[derive(Debug, Clone)]
pub struct Rosenbrock2d {
    params: ParamSet,
}

impl Rosenbrock2d {
    pub fn new() -> Self {
        let mut params = ParamSet::new();
        params
            .push("xy", Tensor::from_vec(vec![-1.2, 1.0]))
            .expect("fresh set");
        Rosenbrock2d { params }
    }

    pub fn with_initial(x: f64, y: f64) -> Self {
        let mut params = ParamSet::new();
        params
            .push("xy", Tensor::from_vec(vec![x, y]))
            .expect("fresh set");
        Rosenbrock2d { params }
    }
}

impl Default for Rosenbrock2d {
    fn default() -> Self {
        Rosenbrock2d::new()
    }
}

impl Model for Rosenbrock2d {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn evaluate(&self, params: &ParamSet, _batch: &Batch) -> Result<(f64, ParamSet)> {
        let xy = params
            .get("xy")
            .ok_or_else(|| Error::InvalidArgument("missing parameter 'xy'".into()))?;
        if xy.shape() != [2] {
            return Err(Error::InvalidArgument(format!(
                "'xy' must have shape [2], got {:?}",
                xy.shape()
            )));
        }
        let (x, y) = (xy.data()[0], xy.data()[1]);
        let loss = (1.0 - x) * (1.0 - x) + 100.0 * (y - x * x) * (y - x * x);
        let gx = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
        let gy = 200.0 * (y - x * x);
        let grad =
            ParamSet::from_entries(vec![("xy".into(), Tensor::from_vec(vec![gx, gy]))])?;
        Ok((loss, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_grad;

    #[test]
    fn value_and_gradient_at_origin() {
        let model = Rosenbrock2d::with_initial(0.0, 0.0);
        let (loss, grad) = model.evaluate(model.params(), &Batch::empty()).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad.get("xy").unwrap().data(), &[-2.0, 0.0]);
    }

    #[test]
    fn minimum_at_one_one() {
        let model = Rosenbrock2d::with_initial(1.0, 1.0);
        let (loss, grad) = model.evaluate(model.params(), &Batch::empty()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad.get("xy").unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = Rosenbrock2d::new();
        let points = [(-1.2, 1.0), (0.3, -0.7), (2.0, 3.5)];
        for (x, y) in points {
            let probe = Rosenbrock2d::with_initial(x, y);
            let (_, analytic) = model.evaluate(probe.params(), &Batch::empty()).unwrap();
            let numeric = finite_diff_grad(
                |p| model.evaluate(p, &Batch::empty()).map(|(l, _)| l),
                probe.params(),
                1e-6,
            )
            .unwrap();
            for (a, n) in analytic
                .get("xy")
                .unwrap()
                .data()
                .iter()
                .zip(numeric.get("xy").unwrap().data())
            {
                assert!(
                    (a - n).abs() <= 1e-4 * a.abs().max(1.0),
                    "at ({x},{y}): {a} vs {n}"
                );
            }
        }
    }
}
