//! Low-level numeric building blocks: dense tensors, a deterministic
//! counter-based RNG, and finite-difference gradients.
//!
//! All arithmetic in the crate is `f64`. Determinism is contractual:
//! the RNG stream is pinned by golden-value tests, and every operation
//! here is a pure function of its inputs.

mod fd;
mod rng;
mod tensor;

pub use fd::finite_diff_grad;
pub use rng::Rng;
pub use tensor::Tensor;
