use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Identity on the forward pass, `−λ·dy` on the backward pass.
#[derive(Debug, Clone, Copy)]
pub struct GradReversal<T> {
    lambda: T,
}

impl<T: Scalar> GradReversal<T> {
    pub fn new(lambda: T) -> Result<Self> {
        if !lambda.is_finite() || lambda < T::zero() {
            return Err(Error::config(format!(
                "gradient reversal coefficient must be finite and non-negative, got {}",
                lambda
            )));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        x.clone()
    }

    pub fn backward(&self, dy: &Tensor<T>) -> Tensor<T> {
        let k = -self.lambda;
        dy.map(|g| k * g)
    }
}
