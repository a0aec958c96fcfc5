use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are created on the first step and must
/// keep matching the parameter list afterwards.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    /// Applies one update using each parameter's accumulated gradient.
    pub fn step(&mut self, params: Vec<&mut Tensor<T>>) -> Result<()> {
        if self.t == 0 {
            self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.v = self.m.clone();
        }
        if params.len() != self.m.len() {
            return Err(Error::State(format!(
                "optimizer tracks {} tensors, got {}",
                self.m.len(),
                params.len()
            )));
        }
        for (i, p) in params.iter().enumerate() {
            if p.len() != self.m[i].len() {
                return Err(Error::State(format!(
                    "parameter {} has {} entries, optimizer moments have {}",
                    i,
                    p.len(),
                    self.m[i].len()
                )));
            }
            if !p.has_grad() {
                return Err(Error::State(format!("parameter {} has no gradient", i)));
            }
        }
        self.t += 1;
        let c = self.config;
        let (b1, b2, eps, lr) = (lit::<T>(c.beta1), lit::<T>(c.beta2), lit::<T>(c.eps), lit::<T>(c.lr));
        let one = T::one();
        let t = self.t as i32;
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);
        for ((p, m), v) in params.into_iter().zip(&mut self.m).zip(&mut self.v) {
            let (theta, grad) = p.value_and_grad_mut();
            let grad = grad.expect("checked above");
            for j in 0..theta.len() {
                let g = grad[j];
                m[j] = b1 * m[j] + (one - b1) * g;
                v[j] = b2 * v[j] + (one - b2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                theta[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
