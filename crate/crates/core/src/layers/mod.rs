//! Layers with hand-written backward passes.
//!
//! Every layer caches what its backward pass needs during `forward` and
//! accumulates parameter gradients into the `grad` buffers of its parameter
//! tensors. Callers zero gradients between updates.

mod batchnorm;
mod blstm;
mod dense;
mod dropout;
mod loss;
mod relu;
mod reversal;

pub use batchnorm::BatchNorm;
pub use blstm::{Blstm, LstmDirection, GATES};
pub use dense::Dense;
pub use dropout::Dropout;
pub use loss::{softmax, softmax_xent, softmax_xent_indices};
pub use relu::{relu_backward, relu_forward, Relu};
pub use reversal::GradReversal;

use crate::tensor::Tensor;

/// Train or eval behaviour for layers that differ between the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Train,
    Eval,
}

/// Access to the trainable tensors of a layer or network, in a fixed order.
pub trait Params<T: crate::Scalar> {
    fn params(&self) -> Vec<&Tensor<T>>;
    fn params_mut(&mut self) -> Vec<&mut Tensor<T>>;

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

#[cfg(test)]
pub(crate) mod check {
    //! Central-difference helpers for the unit tests in this module tree.

    pub fn rel_err(a: f64, b: f64) -> f64 {
        let denom = a.abs().max(b.abs());
        if denom < 1e-8 {
            (a - b).abs()
        } else {
            (a - b).abs() / denom
        }
    }

    /// Max relative error between `analytic` and central differences of `f`
    /// taken at each coordinate of `x`.
    pub fn compare(
        x: &mut [f64],
        analytic: &[f64],
        h: f64,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..x.len() {
            let orig = x[i];
            x[i] = orig + h;
            let fp = f(x);
            x[i] = orig - h;
            let fm = f(x);
            x[i] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            worst = worst.max(rel_err(analytic[i], numeric));
        }
        worst
    }

    /// Weighted-sum objective used to turn a vector output into a scalar.
    pub fn weights(n: usize, seed: u64) -> Vec<f64> {
        let mut r = crate::rng::RngState::new(seed);
        (0..n).map(|_| r.uniform_in(-1.0, 1.0)).collect()
    }

    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
}
