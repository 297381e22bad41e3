use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major tensor of `f64` values.
///
/// The flat buffer length always equals the product of the shape. Tensors
/// are plain values: cloning copies the data, and no interior mutability
/// means they are safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor, checking that `data.len()` matches the shape product.
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; len],
        }
    }

    /// One-dimensional tensor over the given values.
    pub fn from_vec(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// New tensor with the same shape, elements produced by `f`.
    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    /// Euclidean norm over all elements. Empty tensors are an error: a
    /// norm of "nothing" would silently read as a zero gradient.
    pub fn l2_norm(&self) -> Result<f64> {
        if self.data.is_empty() {
            return Err(Error::InvalidArgument(
                "l2_norm of an empty tensor".into(),
            ));
        }
        Ok(self.data.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    /// Multiply every element by `s`. Non-finite scale factors are
    /// rejected rather than being allowed to poison downstream state.
    /// `s == 1.0` returns a bitwise-identical copy.
    pub fn scale(&self, s: f64) -> Result<Tensor> {
        if !s.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scale factor must be finite, got {s}"
            )));
        }
        if s == 1.0 {
            return Ok(self.clone());
        }
        Ok(self.map(|x| x * s))
    }

    /// True if any element is NaN or infinite.
    pub fn has_nonfinite(&self) -> bool {
        self.data.iter().any(|x| !x.is_finite())
    }
}
