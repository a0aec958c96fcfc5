//! Checkpoint layout (little-endian):
//!
//! ```text
//! "DANN" | u16 version
//! u32 H | u32 feature dim | u32 window
//! u8 n + n×u32 generator widths | u8 n + n×u32 classifier widths | u8 n + n×u32 discriminator widths
//! f64 λ | f64 dropout | u8 variant tag
//! u32 tensor count | DTNS tensors (G, C, D; parameters then running statistics)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::network::copy_state;
use super::{ModelBundle, ModelConfig, Variant, CLASSIFIER_WIDTHS, DISCRIMINATOR_WIDTHS, GENERATOR_WIDTHS};
use crate::error::{Error, Result};
use crate::features::{FEATURE_DIM, WINDOW};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DANN";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn write_checkpoint<T: Scalar, W: Write>(bundle: &ModelBundle<T>, w: &mut W) -> std::io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(bundle.config.hidden as u32).to_le_bytes())?;
    w.write_all(&(FEATURE_DIM as u32).to_le_bytes())?;
    w.write_all(&(WINDOW as u32).to_le_bytes())?;
    for widths in [
        bundle.generator.mlp.widths(),
        bundle.classifier.widths(),
        bundle.discriminator.widths(),
    ] {
        w.write_all(&[widths.len() as u8])?;
        for x in widths {
            w.write_all(&(x as u32).to_le_bytes())?;
        }
    }
    w.write_all(&bundle.config.lambda.to_le_bytes())?;
    w.write_all(&bundle.config.dropout.to_le_bytes())?;
    w.write_all(&[bundle.config.variant.tag()])?;
    let state = bundle.all_state();
    w.write_all(&(state.len() as u32).to_le_bytes())?;
    for t in state {
        t.write_to(w)?;
    }
    Ok(())
}

pub fn save_checkpoint<T: Scalar>(bundle: &ModelBundle<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(bundle, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn take<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated checkpoint: {}", e)))?;
    Ok(buf)
}

fn take_u32<R: Read>(r: &mut R) -> Result<usize> {
    Ok(u32::from_le_bytes(take::<R, 4>(r)?) as usize)
}

fn take_widths<R: Read>(r: &mut R) -> Result<Vec<usize>> {
    let n = take::<R, 1>(r)?[0] as usize;
    (0..n).map(|_| take_u32(r)).collect()
}

pub fn read_checkpoint<T: Scalar, R: Read>(r: &mut R, expected: Option<&ModelConfig>) -> Result<ModelBundle<T>> {
    let magic = take::<R, 4>(r)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("bad checkpoint magic {:?}", magic)));
    }
    let version = u16::from_le_bytes(take::<R, 2>(r)?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {}", version)));
    }
    let hidden = take_u32(r)?;
    let feature_dim = take_u32(r)?;
    let window = take_u32(r)?;
    let gen = take_widths(r)?;
    let cls = take_widths(r)?;
    let disc = take_widths(r)?;
    let lambda = f64::from_le_bytes(take::<R, 8>(r)?);
    let dropout = f64::from_le_bytes(take::<R, 8>(r)?);
    let tag = take::<R, 1>(r)?[0];
    let variant = Variant::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown variant tag {}", tag)))?;

    if feature_dim != FEATURE_DIM || window != WINDOW {
        return Err(Error::config(format!(
            "checkpoint windows are {}x{}, this build uses {}x{}",
            window, feature_dim, WINDOW, FEATURE_DIM
        )));
    }
    if gen != GENERATOR_WIDTHS || cls != CLASSIFIER_WIDTHS || disc != DISCRIMINATOR_WIDTHS {
        return Err(Error::config(format!(
            "checkpoint layer widths G{:?} C{:?} D{:?} do not match G{:?} C{:?} D{:?}",
            gen, cls, disc, GENERATOR_WIDTHS, CLASSIFIER_WIDTHS, DISCRIMINATOR_WIDTHS
        )));
    }
    if let Some(exp) = expected {
        if exp.hidden != hidden {
            return Err(Error::config(format!(
                "checkpoint BLSTM hidden size {} does not match expected {}",
                hidden, exp.hidden
            )));
        }
    }
    let config = ModelConfig {
        hidden,
        dropout,
        lambda,
        variant,
    };
    let mut bundle = ModelBundle::<T>::zeroed(config).map_err(|e| Error::Format(e.to_string()))?;
    let count = take_u32(r)?;
    let expected_count = bundle.all_state().len();
    if count != expected_count {
        return Err(Error::Format(format!(
            "checkpoint holds {} tensors, architecture needs {}",
            count, expected_count
        )));
    }
    let tensors = (0..count).map(|_| Tensor::read_from(r)).collect::<Result<Vec<_>>>()?;
    copy_state(bundle.all_state_mut(), tensors)?;
    Ok(bundle)
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<ModelBundle<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&mut BufReader::new(file), None)
}

/// Loads a checkpoint and rejects it when its architecture differs from `expected`.
pub fn load_checkpoint_expecting<T: Scalar>(path: &Path, expected: &ModelConfig) -> Result<ModelBundle<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&mut BufReader::new(file), Some(expected))
}
