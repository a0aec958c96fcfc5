use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Masks `dy` by `x > 0`; the subgradient at exactly zero is zero.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape() != dy.shape() {
        return Err(Error::dim(format!(
            "relu gradient shape {:?} does not match input {:?}",
            dy.shape(),
            x.shape()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&xv, &g)| if xv > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(x.shape(), data)
}

/// Stateful wrapper that keeps the input for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Relu<T> {
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Relu<T> {
    pub fn new() -> Self {
        Self { input: None }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Tensor<T> {
        let y = relu_forward(x);
        self.input = Some(x.clone());
        y
    }

    /// Input cached by the last `forward`.
    pub fn cached_input(&self) -> Option<&Tensor<T>> {
        self.input.as_ref()
    }

    pub fn backward(&self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| Error::State("relu backward called before forward".into()))?;
        relu_backward(x, dy)
    }
}
