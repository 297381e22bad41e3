use crate::error::{Error, Result};
use crate::models::{Batch, Model, ParamSet};
use crate::numerics::{Rng, Tensor};

/// Fully connected network with tanh hidden layers and a linear output,
/// trained under mean squared error `L = (1/2B)·Σ_b ‖y_b − t_b‖²`.
///
/// `sizes = [d0, d1, …, dk]` gives k layers with parameters named
/// `W0,b0,…,W{k-1},b{k-1}`; `Wl` has shape `[d_{l+1}, d_l]` (row-major,
/// output × input). Weights are drawn `N(0,1)/√fan_in`, biases start at
/// zero, so two networks built from equal seeds are bitwise identical.
#[derive(Debug, Clone)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: ParamSet,
}

impl Mlp {
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "an MLP needs at least input and output sizes".into(),
            ));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer sizes must be positive, got {sizes:?}"
            )));
        }
        let mut params = ParamSet::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.next_normal() * scale)
                .collect();
            params.push(format!("W{l}"), Tensor::new(vec![fan_out, fan_in], w)?)?;
            params.push(format!("b{l}"), Tensor::zeros(vec![fan_out]))?;
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    fn check_batch(&self, batch: &Batch) -> Result<usize> {
        let d_in = self.sizes[0];
        let d_out = *self.sizes.last().expect("nonempty");
        let ishape = batch.inputs.shape();
        if ishape.len() != 2 || ishape[1] != d_in || ishape[0] == 0 {
            return Err(Error::InvalidArgument(format!(
                "inputs must have shape [batch>0, {d_in}], got {ishape:?}"
            )));
        }
        let tshape = batch.targets.shape();
        if tshape != [ishape[0], d_out] {
            return Err(Error::InvalidArgument(format!(
                "targets must have shape [{}, {d_out}], got {tshape:?}",
                ishape[0]
            )));
        }
        Ok(ishape[0])
    }

    /// Forward pass only; returns the `[batch, d_out]` outputs.
    pub fn forward(&self, params: &ParamSet, inputs: &Tensor) -> Result<Tensor> {
        let activations = self.forward_all(params, inputs)?;
        Ok(activations.into_iter().last().expect("at least input"))
    }

    /// Activations for every layer, input included.
    fn forward_all(&self, params: &ParamSet, inputs: &Tensor) -> Result<Vec<Tensor>> {
        if !params.same_layout(&self.params) {
            return Err(Error::InvalidArgument(
                "parameter layout does not match this MLP".into(),
            ));
        }
        let batch = inputs.shape()[0];
        let layers = self.sizes.len() - 1;
        let mut acts = vec![inputs.clone()];
        for l in 0..layers {
            let (d_in, d_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = params.get(&format!("W{l}")).expect("layout checked").data();
            let b = params.get(&format!("b{l}")).expect("layout checked").data();
            let prev = acts[l].data();
            let mut z = vec![0.0; batch * d_out];
            for r in 0..batch {
                for j in 0..d_out {
                    let mut acc = b[j];
                    for i in 0..d_in {
                        acc += prev[r * d_in + i] * w[j * d_in + i];
                    }
                    z[r * d_out + j] = acc;
                }
            }
            if l + 1 < layers {
                for v in &mut z {
                    *v = v.tanh();
                }
            }
            acts.push(Tensor::new(vec![batch, d_out], z)?);
        }
        Ok(acts)
    }
}

impl Model for Mlp {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    fn target_dim(&self) -> usize {
        *self.sizes.last().expect("nonempty")
    }

    fn evaluate(&self, params: &ParamSet, batch: &Batch) -> Result<(f64, ParamSet)> {
        let b_count = self.check_batch(batch)?;
        let acts = self.forward_all(params, &batch.inputs)?;
        let layers = self.sizes.len() - 1;
        let inv_b = 1.0 / b_count as f64;

        let outputs = acts.last().expect("nonempty").data();
        let targets = batch.targets.data();
        let d_out = *self.sizes.last().expect("nonempty");

        let mut loss = 0.0;
        // δ for the output layer: (y − t)/B, MSE with the ½ convention.
        let mut delta: Vec<f64> = vec![0.0; b_count * d_out];
        for idx in 0..b_count * d_out {
            let r = outputs[idx] - targets[idx];
            loss += 0.5 * r * r;
            delta[idx] = r * inv_b;
        }
        loss *= inv_b;

        let mut grads = self.params.zeros_like();
        for l in (0..layers).rev() {
            let (d_in, d_out_l) = (self.sizes[l], self.sizes[l + 1]);
            let prev = acts[l].data();
            let mut gb = vec![0.0; d_out_l];
            {
                let gw = grads
                    .tensor_mut(&format!("W{l}"))
                    .expect("layout")
                    .data_mut();
                for r in 0..b_count {
                    for j in 0..d_out_l {
                        let d = delta[r * d_out_l + j];
                        gb[j] += d;
                        for i in 0..d_in {
                            gw[j * d_in + i] += d * prev[r * d_in + i];
                        }
                    }
                }
            }
            grads
                .tensor_mut(&format!("b{l}"))
                .expect("layout")
                .data_mut()
                .copy_from_slice(&gb);
            if l > 0 {
                // δ_prev = (δ·W) ⊙ (1 − a²), a = tanh activation of layer l.
                let w = params.get(&format!("W{l}")).expect("layout").data();
                let mut next = vec![0.0; b_count * d_in];
                for r in 0..b_count {
                    for i in 0..d_in {
                        let mut acc = 0.0;
                        for j in 0..d_out_l {
                            acc += delta[r * d_out_l + j] * w[j * d_in + i];
                        }
                        let a = prev[r * d_in + i];
                        next[r * d_in + i] = acc * (1.0 - a * a);
                    }
                }
                delta = next;
            }
        }
        Ok((loss, grads))
    }
}
