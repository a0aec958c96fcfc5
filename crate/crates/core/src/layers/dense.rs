use super::Params;
use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::scalar::Scalar;
use crate::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};

/// Fully connected layer, `y = x·Wᵀ + b` with `W` stored `out×in`.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(input: usize, output: usize, rng: &mut RngState) -> Result<Self> {
        Ok(Self {
            weight: Tensor::xavier_init(output, input, rng)?,
            bias: Tensor::zeros(&[output]),
            input: None,
        })
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[output, input]),
            bias: Tensor::zeros(&[output]),
            input: None,
        }
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.rank() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::dim(format!(
                "dense weight {:?} and bias {:?} disagree",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Self {
            weight,
            bias,
            input: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    /// Accepts an `n×in` matrix, or a single rank-1 row of length `in`.
    fn as_batch(&self, x: &Tensor<T>) -> Result<(usize, Tensor<T>)> {
        let input = self.input_dim();
        let x = if x.rank() == 1 {
            x.clone().reshape(&[1, x.len()])?
        } else {
            x.clone()
        };
        if x.rank() != 2 || x.shape()[1] != input {
            return Err(Error::dim(format!(
                "dense layer expects {} input columns, got shape {:?}",
                input,
                x.shape()
            )));
        }
        Ok((x.shape()[0], x))
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, x) = self.as_batch(x)?;
        Ok(self.apply(n, &x))
    }

    fn apply(&self, n: usize, x: &Tensor<T>) -> Tensor<T> {
        let (out, input) = (self.output_dim(), self.input_dim());
        let mut y = Vec::with_capacity(n * out);
        for _ in 0..n {
            y.extend_from_slice(self.bias.data());
        }
        gemm_nt(x.data(), self.weight.data(), &mut y, n, input, out);
        Tensor::new(&[n, out], y).expect("dense output shape")
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, x) = self.as_batch(x)?;
        let y = self.apply(n, &x);
        self.input = Some(x);
        Ok(y)
    }

    /// Accumulates `dW += dyᵀx`, `db += Σ dy` and returns `dx = dy·W`.
    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| Error::State("dense backward called before forward".into()))?;
        let (n, input, out) = (x.shape()[0], self.input_dim(), self.output_dim());
        if dy.len() != n * out {
            return Err(Error::dim(format!(
                "dense upstream gradient {:?} does not match output {}x{}",
                dy.shape(),
                n,
                out
            )));
        }
        gemm_tn(dy.data(), x.data(), self.weight.grad_mut(), n, out, input);
        let db = self.bias.grad_mut();
        for row in dy.data().chunks_exact(out) {
            for (g, &v) in db.iter_mut().zip(row) {
                *g += v;
            }
        }
        let mut dx = vec![T::zero(); n * input];
        gemm_nn(dy.data(), self.weight.data(), &mut dx, n, out, input);
        Tensor::new(&[n, input], dx)
    }
}

impl<T: Scalar> Params<T> for Dense<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
