//! Audio frontend: framing, MFCC, per-session CMVN and context splicing.

mod audio;
mod cmvn;
mod framing;
mod io;
mod mfcc;
mod segments;
mod splice;

pub use audio::{read_wav, write_wav, AudioBuffer};
pub use cmvn::{cmvn_session, CMVN_VAR_FLOOR};
pub use framing::{frame_count, frame_signal, FrameGeometry, Framed};
pub use io::{read_feature_matrix, sidecar_path, write_feature_matrix};
pub use mfcc::{hz_to_mel, mel_to_hz, mfcc, Mfcc, LOG_FLOOR, NUM_MEL_FILTERS, PRE_EMPHASIS};
pub use segments::{frame_labels, parse_segments, read_segments, write_segments, Segment};
pub use splice::{splice, splice_unlabeled, stack_windows, SpliceSample};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const FEATURE_DIM: usize = 23;
pub const CONTEXT: usize = 15;
pub const WINDOW: usize = 2 * CONTEXT + 1;
pub const SPLICE_STRIDE: usize = 15;
pub const FRAME_LEN_MS: u32 = 40;
pub const FRAME_SHIFT_MS: u32 = 20;

/// Per-session `T×23` feature frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub frames: Tensor<T>,
    pub session_id: String,
    pub frame_len_ms: u32,
    pub frame_shift_ms: u32,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(session_id: impl Into<String>, frames: Tensor<T>) -> Result<Self> {
        if frames.rank() != 2 || frames.shape()[1] != FEATURE_DIM {
            return Err(Error::dim(format!(
                "feature matrix must have {} columns, got shape {:?}",
                FEATURE_DIM,
                frames.shape()
            )));
        }
        Ok(Self {
            frames,
            session_id: session_id.into(),
            frame_len_ms: FRAME_LEN_MS,
            frame_shift_ms: FRAME_SHIFT_MS,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.shape()[0]
    }

    /// Time in seconds of the centre of frame `i`.
    pub fn frame_center_sec(&self, i: usize) -> f64 {
        (i as f64 * self.frame_shift_ms as f64 + self.frame_len_ms as f64 / 2.0) / 1000.0
    }
}
