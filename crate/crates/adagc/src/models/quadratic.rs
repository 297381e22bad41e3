use crate::error::{Error, Result};
use crate::models::{Batch, Model, ParamSet};
use crate::numerics::{Rng, Tensor};

/// Quadratic bowl `f(θ) = ½‖Aθ − b‖²` with gradient `Aᵀ(Aθ − b)`.
///
/// `A` should be well conditioned for the convergence scenarios; the
/// gradient formula itself is valid for any square `A`. The single
/// parameter is named `"theta"` and starts at the origin unless
/// overridden.
#[derive(Debug, Clone)]
pub struct QuadraticBowl {
    a: Tensor,
    b: Tensor,
    dim: usize,
    params: ParamSet,
}

impl QuadraticBowl {
    pub fn new(a: Tensor, b: Tensor) -> Result<Self> {
        let shape = a.shape();
        if shape.len() != 2 || shape[0] != shape[1] {
            return Err(Error::InvalidArgument(format!(
                "quadratic bowl needs a square matrix, got shape {shape:?}"
            )));
        }
        let dim = shape[0];
        if b.shape() != [dim] {
            return Err(Error::InvalidArgument(format!(
                "offset must have shape [{dim}], got {:?}",
                b.shape()
            )));
        }
        let mut params = ParamSet::new();
        params.push("theta", Tensor::zeros(vec![dim]))?;
        Ok(QuadraticBowl { a, b, dim, params })
    }

    /// Replace the starting point (shape must stay `[dim]`).
    pub fn with_initial(mut self, theta0: Tensor) -> Result<Self> {
        if theta0.shape() != [self.dim] {
            return Err(Error::InvalidArgument(format!(
                "initial point must have shape [{}], got {:?}",
                self.dim,
                theta0.shape()
            )));
        }
        self.params = ParamSet::from_entries(vec![("theta".into(), theta0)])?;
        Ok(self)
    }

    /// Random symmetric positive-definite bowl with eigenvalues spread
    /// evenly over `[eig_min, eig_max]`: `A = Q·diag(λ)·Qᵀ` with `Q` from
    /// Gram-Schmidt on a random Gaussian matrix.
    pub fn random(dim: usize, eig_min: f64, eig_max: f64, rng: &mut Rng) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !(eig_min > 0.0 && eig_max >= eig_min) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < eig_min <= eig_max, got [{eig_min}, {eig_max}]"
            )));
        }
        // Modified Gram-Schmidt; resample a column if it degenerates.
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(dim);
        while q.len() < dim {
            let mut v = rng.normals(dim);
            for u in &q {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (x, u_i) in v.iter_mut().zip(u) {
                    *x -= dot * u_i;
                }
            }
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-8 {
                for x in &mut v {
                    *x /= n;
                }
                q.push(v);
            }
        }
        let eigs: Vec<f64> = (0..dim)
            .map(|i| {
                if dim == 1 {
                    eig_min
                } else {
                    eig_min + (eig_max - eig_min) * i as f64 / (dim - 1) as f64
                }
            })
            .collect();
        let mut a = vec![0.0; dim * dim];
        for (k, col) in q.iter().enumerate() {
            for i in 0..dim {
                for j in 0..dim {
                    a[i * dim + j] += eigs[k] * col[i] * col[j];
                }
            }
        }
        // Symmetrize away the last-bit asymmetry from accumulation order.
        for i in 0..dim {
            for j in (i + 1)..dim {
                let s = 0.5 * (a[i * dim + j] + a[j * dim + i]);
                a[i * dim + j] = s;
                a[j * dim + i] = s;
            }
        }
        let b = Tensor::from_vec(rng.normals(dim));
        QuadraticBowl::new(Tensor::new(vec![dim, dim], a)?, b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Model for QuadraticBowl {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn evaluate(&self, params: &ParamSet, _batch: &Batch) -> Result<(f64, ParamSet)> {
        let theta = params
            .get("theta")
            .ok_or_else(|| Error::InvalidArgument("missing parameter 'theta'".into()))?;
        if theta.shape() != [self.dim] {
            return Err(Error::InvalidArgument(format!(
                "'theta' must have shape [{}], got {:?}",
                self.dim,
                theta.shape()
            )));
        }
        let n = self.dim;
        let a = self.a.data();
        let th = theta.data();
        // r = Aθ − b
        let mut r = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += a[i * n + j] * th[j];
            }
            r[i] = acc - self.b.data()[i];
        }
        let loss = 0.5 * r.iter().map(|x| x * x).sum::<f64>();
        // g = Aᵀr
        let mut g = vec![0.0; n];
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += a[i * n + j] * r[i];
            }
            g[j] = acc;
        }
        let grad = ParamSet::from_entries(vec![("theta".into(), Tensor::from_vec(g))])?;
        Ok((loss, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_grad;

    fn identity(dim: usize) -> Tensor {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Tensor::new(vec![dim, dim], data).unwrap()
    }

    #[test]
    fn rejects_non_square_matrix() {
        let a = Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap();
        let err = QuadraticBowl::new(a, Tensor::zeros(vec![2])).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn identity_bowl_loss_at_unit_point() {
        // A = I, b = 0, θ = [1, 1] → f = ½(1+1) = 1.
        let bowl = QuadraticBowl::new(identity(2), Tensor::zeros(vec![2]))
            .unwrap()
            .with_initial(Tensor::from_vec(vec![1.0, 1.0]))
            .unwrap();
        let (loss, grad) = bowl.evaluate(bowl.params(), &Batch::empty()).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad.get("theta").unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::new(11);
        let bowl = QuadraticBowl::random(5, 0.5, 2.0, &mut rng).unwrap();
        let mut point = ParamSet::new();
        point
            .push("theta", Tensor::from_vec(rng.normals(5)))
            .unwrap();
        let (_, analytic) = bowl.evaluate(&point, &Batch::empty()).unwrap();
        let numeric = finite_diff_grad(
            |p| bowl.evaluate(p, &Batch::empty()).map(|(l, _)| l),
            &point,
            1e-6,
        )
        .unwrap();
        for (a, n) in analytic
            .get("theta")
            .unwrap()
            .data()
            .iter()
            .zip(numeric.get("theta").unwrap().data())
        {
            assert!((a - n).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {n}");
        }
    }

    #[test]
    fn random_bowl_is_symmetric() {
        let mut rng = Rng::new(3);
        let bowl = QuadraticBowl::random(6, 0.3, 1.0, &mut rng).unwrap();
        let a = bowl.a.data();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(a[i * 6 + j], a[j * 6 + i]);
            }
        }
    }
}
