//! Building blocks shared by the generator, the heads and the fusion net.

use crate::error::{Error, Result};
use crate::layers::{BatchNorm, Blstm, Dense, Dropout, Mode, Params, Relu};
use crate::rng::RngState;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Dense → ReLU → BatchNorm → Dropout.
#[derive(Debug, Clone)]
pub struct HiddenBlock<T> {
    pub dense: Dense<T>,
    relu: Relu<T>,
    pub norm: BatchNorm<T>,
    pub dropout: Dropout<T>,
}

impl<T: Scalar> HiddenBlock<T> {
    pub fn new(input: usize, width: usize, dropout: f64, rng: &mut RngState) -> Result<Self> {
        Ok(Self {
            dense: Dense::new(input, width, rng)?,
            relu: Relu::new(),
            norm: BatchNorm::new(width),
            dropout: Dropout::new(dropout)?,
        })
    }

    pub fn zeros(input: usize, width: usize, dropout: f64) -> Result<Self> {
        Ok(Self {
            dense: Dense::zeros(input, width),
            relu: Relu::new(),
            norm: BatchNorm::new(width),
            dropout: Dropout::new(dropout)?,
        })
    }

    pub fn forward(&mut self, x: &Tensor<T>, rng: &mut RngState) -> Result<Tensor<T>> {
        let h = self.dense.forward(x)?;
        let h = self.relu.forward(&h);
        let h = self.norm.forward(&h)?;
        Ok(self.dropout.forward(&h, rng))
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = self.dense.infer(x)?;
        let h = crate::layers::relu_forward(&h);
        self.norm.infer(&h)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.dropout.backward(dy)?;
        let g = self.norm.backward(&g)?;
        let g = self.relu.backward(&g)?;
        self.dense.backward(&g)
    }

    /// Dense output fed to the ReLU on the last train-path forward.
    pub fn pre_activation(&self) -> Option<&Tensor<T>> {
        self.relu.cached_input()
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.norm.mode = mode;
        self.dropout.mode = mode;
    }
}

impl<T: Scalar> Params<T> for HiddenBlock<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        let mut p = self.dense.params();
        p.extend(self.norm.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.dense.params_mut();
        p.extend(self.norm.params_mut());
        p
    }
}

/// Stack of hidden blocks with an optional linear head producing logits.
/// The head starts at zero so an untrained network outputs uniform posteriors.
#[derive(Debug, Clone)]
pub struct Mlp<T> {
    pub blocks: Vec<HiddenBlock<T>>,
    pub head: Option<Dense<T>>,
}

impl<T: Scalar> Mlp<T> {
    pub fn new(input: usize, widths: &[usize], head: Option<usize>, dropout: f64, rng: &mut RngState) -> Result<Self> {
        let mut blocks = Vec::with_capacity(widths.len());
        let mut prev = input;
        for &w in widths {
            blocks.push(HiddenBlock::new(prev, w, dropout, rng)?);
            prev = w;
        }
        Ok(Self {
            blocks,
            head: head.map(|k| Dense::zeros(prev, k)),
        })
    }

    pub fn zeros(input: usize, widths: &[usize], head: Option<usize>, dropout: f64) -> Result<Self> {
        let mut blocks = Vec::with_capacity(widths.len());
        let mut prev = input;
        for &w in widths {
            blocks.push(HiddenBlock::zeros(prev, w, dropout)?);
            prev = w;
        }
        Ok(Self {
            blocks,
            head: head.map(|k| Dense::zeros(prev, k)),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.blocks
            .first()
            .map(|b| b.dense.input_dim())
            .or_else(|| self.head.as_ref().map(|h| h.input_dim()))
            .unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        match &self.head {
            Some(h) => h.output_dim(),
            None => self.blocks.last().map_or(0, |b| b.dense.output_dim()),
        }
    }

    pub fn widths(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dense.output_dim()).collect()
    }

    pub fn forward(&mut self, x: &Tensor<T>, rng: &mut RngState) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for b in &mut self.blocks {
            h = b.forward(&h, rng)?;
        }
        match &mut self.head {
            Some(head) => head.forward(&h),
            None => Ok(h),
        }
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for b in &self.blocks {
            h = b.infer(&h)?;
        }
        match &self.head {
            Some(head) => head.infer(&h),
            None => Ok(h),
        }
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = match &mut self.head {
            Some(head) => head.backward(dy)?,
            None => dy.clone(),
        };
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(&g)?;
        }
        Ok(g)
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.blocks.iter_mut().for_each(|b| b.set_mode(mode));
    }

    pub fn set_update_running(&mut self, on: bool) {
        self.blocks.iter_mut().for_each(|b| b.norm.update_running = on);
    }

    /// Parameters followed by batch-norm running statistics.
    pub fn state(&self) -> Vec<&Tensor<T>> {
        let mut s = self.params();
        for b in &self.blocks {
            s.push(&b.norm.running_mean);
            s.push(&b.norm.running_var);
        }
        s
    }

    pub fn state_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut s: Vec<&mut Tensor<T>> = Vec::new();
        let mut running: Vec<&mut Tensor<T>> = Vec::new();
        for b in &mut self.blocks {
            s.extend(b.dense.params_mut());
            let norm = &mut b.norm;
            s.push(&mut norm.gamma);
            s.push(&mut norm.beta);
            running.push(&mut norm.running_mean);
            running.push(&mut norm.running_var);
        }
        if let Some(h) = &mut self.head {
            s.extend(h.params_mut());
        }
        s.extend(running);
        s
    }
}

impl<T: Scalar> Params<T> for Mlp<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        let mut p: Vec<&Tensor<T>> = self.blocks.iter().flat_map(|b| b.params()).collect();
        if let Some(h) = &self.head {
            p.extend(h.params());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p: Vec<&mut Tensor<T>> = self.blocks.iter_mut().flat_map(|b| b.params_mut()).collect();
        if let Some(h) = &mut self.head {
            p.extend(h.params_mut());
        }
        p
    }
}

/// BLSTM over the `31×23` window followed by the dense stack.
#[derive(Debug, Clone)]
pub struct Generator<T> {
    pub blstm: Blstm<T>,
    pub mlp: Mlp<T>,
}

impl<T: Scalar> Generator<T> {
    pub fn forward(&mut self, x: &Tensor<T>, rng: &mut RngState) -> Result<Tensor<T>> {
        let h = self.blstm.forward(x)?;
        self.mlp.forward(&h, rng)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.mlp.infer(&self.blstm.infer(x)?)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.mlp.backward(dy)?;
        self.blstm.backward(&g)
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mlp.set_mode(mode);
    }

    pub fn set_update_running(&mut self, on: bool) {
        self.mlp.set_update_running(on);
    }

    pub fn state(&self) -> Vec<&Tensor<T>> {
        let mut s = self.blstm.params();
        s.extend(self.mlp.state());
        s
    }

    pub fn state_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut s = self.blstm.params_mut();
        s.extend(self.mlp.state_mut());
        s
    }
}

impl<T: Scalar> Params<T> for Generator<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        let mut p = self.blstm.params();
        p.extend(self.mlp.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.blstm.params_mut();
        p.extend(self.mlp.params_mut());
        p
    }
}

/// Owned copy of every tensor in a network's state, for bitwise comparisons.
pub fn snapshot<T: Scalar>(state: Vec<&Tensor<T>>) -> Vec<Vec<T>> {
    state.into_iter().map(|t| t.data().to_vec()).collect()
}

pub(crate) fn copy_state<T: Scalar>(dst: Vec<&mut Tensor<T>>, src: Vec<Tensor<T>>) -> Result<()> {
    if dst.len() != src.len() {
        return Err(Error::Format(format!(
            "expected {} state tensors, found {}",
            dst.len(),
            src.len()
        )));
    }
    for (d, s) in dst.into_iter().zip(src) {
        if d.shape() != s.shape() {
            return Err(Error::Format(format!(
                "state tensor shape {:?} does not match expected {:?}",
                s.shape(),
                d.shape()
            )));
        }
        d.data_mut().copy_from_slice(s.data());
    }
    Ok(())
}
