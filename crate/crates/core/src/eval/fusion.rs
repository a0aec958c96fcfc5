//! Embedding fusion: a fresh classifier over concatenated GAN and GR embeddings.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::label::Speaker;
use crate::layers::{softmax, softmax_xent_indices, Mode, Params};
use crate::model::{copy_state, Mlp, EMBEDDING_DIM, NUM_CLASSES};
use crate::rng::RngState;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::train::{AdamConfig, AdamState, STREAM_FUSION, STREAM_FUSION_TRAIN};

pub const FUSION_WIDTHS: [usize; 3] = [64, 16, 16];
const MAGIC: &[u8; 4] = b"FUSE";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            dropout: 0.2,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FusionModel<T> {
    pub net: Mlp<T>,
}

fn concat_embeddings<T: Scalar>(gan: &Tensor<T>, gr: &Tensor<T>) -> Result<Tensor<T>> {
    for (name, e) in [("GAN", gan), ("GR", gr)] {
        if e.rank() != 2 || e.shape()[1] != EMBEDDING_DIM {
            return Err(Error::dim(format!(
                "{} embeddings must be n×{}, got {:?}",
                name,
                EMBEDDING_DIM,
                e.shape()
            )));
        }
    }
    if gan.shape()[0] != gr.shape()[0] {
        return Err(Error::Alignment(format!(
            "{} GAN embeddings against {} GR embeddings",
            gan.shape()[0],
            gr.shape()[0]
        )));
    }
    let n = gan.shape()[0];
    let mut data = Vec::with_capacity(n * 2 * EMBEDDING_DIM);
    for i in 0..n {
        data.extend_from_slice(gan.row(i));
        data.extend_from_slice(gr.row(i));
    }
    Tensor::new(&[n, 2 * EMBEDDING_DIM], data)
}

impl<T: Scalar> FusionModel<T> {
    pub fn new(dropout: f64, rng: &mut RngState) -> Result<Self> {
        Ok(Self {
            net: Mlp::new(2 * EMBEDDING_DIM, &FUSION_WIDTHS, Some(NUM_CLASSES), dropout, rng)?,
        })
    }

    /// Eval-mode posteriors (child, adult) for aligned embedding rows.
    pub fn posteriors(&self, gan: &Tensor<T>, gr: &Tensor<T>) -> Result<Tensor<T>> {
        softmax(&self.net.infer(&concat_embeddings(gan, gr)?)?)
    }

    /// Eval-mode mean cross-entropy.
    pub fn loss(&self, gan: &Tensor<T>, gr: &Tensor<T>, labels: &[Speaker]) -> Result<T> {
        let logits = self.net.infer(&concat_embeddings(gan, gr)?)?;
        let idx: Vec<usize> = labels.iter().map(|s| s.index()).collect();
        Ok(softmax_xent_indices(&logits, &idx)?.0)
    }
}

/// Trains a fusion classifier for a fixed number of epochs on labeled source
/// embeddings.
pub fn embed_fuse_train<T: Scalar>(gan: &Tensor<T>, gr: &Tensor<T>, labels: &[Speaker], config: &FusionConfig) -> Result<FusionModel<T>> {
    let x = concat_embeddings(gan, gr)?;
    let n = x.shape()[0];
    if labels.len() != n {
        return Err(Error::Alignment(format!("{} labels for {} embeddings", labels.len(), n)));
    }
    if config.batch_size < 2 {
        return Err(Error::config("fusion batch size must be at least 2"));
    }
    let mut model = FusionModel::new(config.dropout, &mut RngState::with_stream(config.seed, STREAM_FUSION))?;
    let mut rng = RngState::with_stream(config.seed, STREAM_FUSION_TRAIN);
    let mut adam = AdamState::new(config.adam);
    model.net.set_mode(Mode::Train);
    let width = 2 * EMBEDDING_DIM;
    for _ in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        for idx in order.chunks(config.batch_size).filter(|c| c.len() >= 2) {
            let mut data = Vec::with_capacity(idx.len() * width);
            for &i in idx {
                data.extend_from_slice(x.row(i));
            }
            let batch = Tensor::new(&[idx.len(), width], data)?;
            let y: Vec<usize> = idx.iter().map(|&i| labels[i].index()).collect();
            model.net.zero_grads();
            let logits = model.net.forward(&batch, &mut rng)?;
            let (_, d) = softmax_xent_indices(&logits, &y)?;
            model.net.backward(&d)?;
            adam.step(model.net.params_mut())?;
        }
    }
    model.net.set_mode(Mode::Eval);
    Ok(model)
}

pub fn save_fusion_model<T: Scalar>(model: &FusionModel<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let state = model.net.state();
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&model.net.blocks[0].dropout.rate().to_le_bytes())?;
        w.write_all(&(state.len() as u32).to_le_bytes())?;
        for t in &state {
            t.write_to(w)?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

pub fn load_fusion_model<T: Scalar>(path: &Path) -> Result<FusionModel<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut head = [0u8; 18];
    r.read_exact(&mut head)
        .map_err(|e| Error::Format(format!("truncated fusion model: {}", e)))?;
    if &head[..4] != MAGIC || u16::from_le_bytes([head[4], head[5]]) != VERSION {
        return Err(Error::Format("not a fusion model file".into()));
    }
    let dropout = f64::from_le_bytes(head[6..14].try_into().expect("8 bytes"));
    let count = u32::from_le_bytes(head[14..18].try_into().expect("4 bytes")) as usize;
    let mut net = Mlp::zeros(2 * EMBEDDING_DIM, &FUSION_WIDTHS, Some(NUM_CLASSES), dropout)
        .map_err(|e| Error::Format(e.to_string()))?;
    let tensors = (0..count).map(|_| Tensor::read_from(&mut r)).collect::<Result<Vec<_>>>()?;
    copy_state(net.state_mut(), tensors)?;
    net.set_mode(Mode::Eval);
    Ok(FusionModel { net })
}
