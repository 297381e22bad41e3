use crate::error::{Error, Result};
use crate::models::ParamSet;

/// Central-difference gradient of a scalar function over a `ParamSet`.
///
/// Each coordinate is perturbed by `±h` in turn:
/// `g_i ≈ (f(x + h·e_i) − f(x − h·e_i)) / (2h)`. The result has the same
/// layout as `x`. Used as the independent oracle for analytic gradients.
pub fn finite_diff_grad<F>(mut f: F, x: &ParamSet, h: f64) -> Result<ParamSet>
where
    F: FnMut(&ParamSet) -> Result<f64>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive and finite, got {h}"
        )));
    }
    let mut grad = x.clone();
    let names: Vec<String> = x.names().map(str::to_owned).collect();
    for name in &names {
        let len = x.get(name).expect("name from same set").len();
        for i in 0..len {
            let mut plus = x.clone();
            plus.tensor_mut(name).expect("layout").data_mut()[i] += h;
            let mut minus = x.clone();
            minus.tensor_mut(name).expect("layout").data_mut()[i] -= h;
            let fp = f(&plus)?;
            let fm = f(&minus)?;
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::Numeric(format!(
                    "objective returned a non-finite value while probing '{name}'[{i}]"
                )));
            }
            grad.tensor_mut(name).expect("layout").data_mut()[i] = (fp - fm) / (2.0 * h);
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn single(name: &str, data: Vec<f64>) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.push(name, Tensor::from_vec(data)).unwrap();
        ps
    }

    #[test]
    fn rejects_nonpositive_step() {
        let x = single("x", vec![1.0]);
        for h in [0.0, -1e-6, f64::NAN] {
            assert!(finite_diff_grad(|_| Ok(0.0), &x, h).is_err());
        }
    }

    #[test]
    fn matches_quadratic_form_gradient() {
        // f(x) = 0.5 xᵀAx with symmetric A has ∇f = Ax.
        let a = [[2.0, 0.5, 0.0], [0.5, 1.5, -0.3], [0.0, -0.3, 1.0]];
        let x0 = vec![0.7, -1.2, 0.4];
        let f = |p: &ParamSet| {
            let x = p.get("x").unwrap().data();
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    acc += 0.5 * x[i] * a[i][j] * x[j];
                }
            }
            Ok(acc)
        };
        let grad = finite_diff_grad(f, &single("x", x0.clone()), 1e-6).unwrap();
        for (i, row) in a.iter().enumerate() {
            let expect: f64 = row.iter().zip(&x0).map(|(aij, xj)| aij * xj).sum();
            let got = grad.get("x").unwrap().data()[i];
            assert!(
                (got - expect).abs() <= 1e-6 * expect.abs().max(1.0),
                "coord {i}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn surfaces_nonfinite_objective_values() {
        let x = single("x", vec![1.0]);
        let err = finite_diff_grad(|_| Ok(f64::NAN), &x, 1e-6).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }
}
