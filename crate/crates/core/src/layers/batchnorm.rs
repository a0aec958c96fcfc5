use super::{Mode, Params};
use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Scalar};
use crate::tensor::{column_mean_var, Tensor};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

/// Per-feature batch normalization over the rows of an `n×d` matrix.
///
/// Train mode normalizes by the biased batch statistics and, unless
/// `update_running` is off, folds them into the running estimates as
/// `running = momentum·running + (1 − momentum)·batch`. Eval mode uses the
/// running estimates only.
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: T,
    pub eps: T,
    pub mode: Mode,
    pub update_running: bool,
    cache: Option<Cache<T>>,
}

#[derive(Debug, Clone)]
struct Cache<T> {
    xhat: Vec<T>,
    inv_std: Vec<T>,
    n: usize,
    batch_stats: bool,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[dim], T::one()),
            beta: Tensor::zeros(&[dim]),
            running_mean: Tensor::zeros(&[dim]),
            running_var: Tensor::filled(&[dim], T::one()),
            momentum: lit(DEFAULT_MOMENTUM),
            eps: lit(DEFAULT_EPS),
            mode: Mode::Train,
            update_running: true,
            cache: None,
        }
    }

    pub fn with_eps(mut self, eps: T) -> Self {
        self.eps = eps;
        self
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<usize> {
        if x.rank() != 2 || x.shape()[1] != self.dim() {
            return Err(Error::dim(format!(
                "batch norm over {} features got shape {:?}",
                self.dim(),
                x.shape()
            )));
        }
        Ok(x.shape()[0])
    }

    /// Eval-mode normalization without touching any cache.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let n = self.check_input(x)?;
        let d = self.dim();
        let inv_std: Vec<T> = self
            .running_var
            .data()
            .iter()
            .map(|&v| T::one() / (v + self.eps).sqrt())
            .collect();
        let mut y = x.data().to_vec();
        for row in y.chunks_exact_mut(d) {
            for j in 0..d {
                let xhat = (row[j] - self.running_mean.data()[j]) * inv_std[j];
                row[j] = self.gamma.data()[j] * xhat + self.beta.data()[j];
            }
        }
        Tensor::new(&[n, d], y)
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let n = self.check_input(x)?;
        let d = self.dim();
        let (mean, inv_std, batch_stats) = match self.mode {
            Mode::Eval => (
                self.running_mean.data().to_vec(),
                self.running_var
                    .data()
                    .iter()
                    .map(|&v| T::one() / (v + self.eps).sqrt())
                    .collect::<Vec<_>>(),
                false,
            ),
            Mode::Train => {
                if n < 2 {
                    return Err(Error::DegenerateBatch(format!(
                        "train-mode batch norm needs at least 2 rows, got {}",
                        n
                    )));
                }
                let (mean, var) = column_mean_var(x.data(), n, d);
                if self.update_running {
                    let m = self.momentum;
                    let keep = T::one() - m;
                    for j in 0..d {
                        let rm = &mut self.running_mean.data_mut()[j];
                        *rm = m * *rm + keep * mean[j];
                        let rv = &mut self.running_var.data_mut()[j];
                        *rv = m * *rv + keep * var[j];
                    }
                }
                let inv_std = var.iter().map(|&v| T::one() / (v + self.eps).sqrt()).collect();
                (mean, inv_std, true)
            }
        };
        let mut xhat = x.data().to_vec();
        let mut y = vec![T::zero(); n * d];
        for (xrow, yrow) in xhat.chunks_exact_mut(d).zip(y.chunks_exact_mut(d)) {
            for j in 0..d {
                xrow[j] = (xrow[j] - mean[j]) * inv_std[j];
                yrow[j] = self.gamma.data()[j] * xrow[j] + self.beta.data()[j];
            }
        }
        self.cache = Some(Cache {
            xhat,
            inv_std,
            n,
            batch_stats,
        });
        Tensor::new(&[n, d], y)
    }

    /// With batch statistics this is the full Jacobian including the paths
    /// through the batch mean and variance.
    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("batch norm backward called before forward".into()))?;
        let (n, d) = (cache.n, self.dim());
        if dy.len() != n * d {
            return Err(Error::dim(format!(
                "batch norm upstream gradient {:?} does not match {}x{}",
                dy.shape(),
                n,
                d
            )));
        }
        let mut sum_dy = vec![T::zero(); d];
        let mut sum_dy_xhat = vec![T::zero(); d];
        for (g, xh) in dy.data().chunks_exact(d).zip(cache.xhat.chunks_exact(d)) {
            for j in 0..d {
                sum_dy[j] += g[j];
                sum_dy_xhat[j] += g[j] * xh[j];
            }
        }
        for (gg, &s) in self.gamma.grad_mut().iter_mut().zip(&sum_dy_xhat) {
            *gg += s;
        }
        for (gb, &s) in self.beta.grad_mut().iter_mut().zip(&sum_dy) {
            *gb += s;
        }
        let gamma = self.gamma.data();
        let mut dx = vec![T::zero(); n * d];
        if cache.batch_stats {
            let inv_n = T::one() / from_usize::<T>(n);
            for ((out, g), xh) in dx
                .chunks_exact_mut(d)
                .zip(dy.data().chunks_exact(d))
                .zip(cache.xhat.chunks_exact(d))
            {
                for j in 0..d {
                    out[j] = gamma[j] * cache.inv_std[j] * inv_n
                        * (from_usize::<T>(n) * g[j] - sum_dy[j] - xh[j] * sum_dy_xhat[j]);
                }
            }
        } else {
            for (out, g) in dx.chunks_exact_mut(d).zip(dy.data().chunks_exact(d)) {
                for j in 0..d {
                    out[j] = gamma[j] * cache.inv_std[j] * g[j];
                }
            }
        }
        Tensor::new(&[n, d], dx)
    }
}

impl<T: Scalar> Params<T> for BatchNorm<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.gamma, &mut self.beta]
    }
}
