use super::Mode;
use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::scalar::{lit, Scalar};
use crate::tensor::Tensor;

/// Inverted dropout: kept units are scaled by `1/(1−p)` at train time so that
/// eval mode is the identity.
#[derive(Debug, Clone)]
pub struct Dropout<T> {
    rate: f64,
    pub mode: Mode,
    mask: Option<Vec<T>>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config(format!("dropout rate must be in [0, 1), got {}", rate)));
        }
        Ok(Self {
            rate,
            mode: Mode::Train,
            mask: None,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn forward(&mut self, x: &Tensor<T>, rng: &mut RngState) -> Tensor<T> {
        if self.mode == Mode::Eval || self.rate == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let scale: T = lit(1.0 / (1.0 - self.rate));
        let keep = 1.0 - self.rate;
        let mask: Vec<T> = (0..x.len())
            .map(|_| if rng.bernoulli(keep) { scale } else { T::zero() })
            .collect();
        let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        self.mask = Some(mask);
        Tensor::new(x.shape(), data).expect("dropout output shape")
    }

    pub fn backward(&self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        match &self.mask {
            None => Ok(dy.clone()),
            Some(mask) => {
                if mask.len() != dy.len() {
                    return Err(Error::dim(format!(
                        "dropout gradient {:?} does not match cached mask of {} entries",
                        dy.shape(),
                        mask.len()
                    )));
                }
                let data = dy.data().iter().zip(mask).map(|(&g, &m)| g * m).collect();
                Tensor::new(dy.shape(), data)
            }
        }
    }
}
