use super::{AudioBuffer, FRAME_LEN_MS, FRAME_SHIFT_MS};
use crate::scalar::Scalar;

/// Frame length and shift in samples for a given sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGeometry {
    pub length: usize,
    pub shift: usize,
}

impl FrameGeometry {
    pub fn for_rate(sample_rate: u32) -> Self {
        let samples = |ms: u32| ((sample_rate as u64 * ms as u64 + 500) / 1000) as usize;
        Self {
            length: samples(FRAME_LEN_MS),
            shift: samples(FRAME_SHIFT_MS),
        }
    }
}

/// `floor((n − len)/shift) + 1` for `n ≥ len`, otherwise 0.
pub fn frame_count(n: usize, length: usize, shift: usize) -> usize {
    if n < length || length == 0 || shift == 0 {
        0
    } else {
        (n - length) / shift + 1
    }
}

#[derive(Debug, Clone)]
pub struct Framed<T> {
    pub frames: Vec<Vec<T>>,
    pub geometry: FrameGeometry,
    /// Set when the input was shorter than a single frame.
    pub short_input: bool,
}

pub fn frame_signal<T: Scalar>(audio: &AudioBuffer<T>) -> Framed<T> {
    let geometry = FrameGeometry::for_rate(audio.sample_rate);
    let n = frame_count(audio.len(), geometry.length, geometry.shift);
    let frames = (0..n)
        .map(|i| {
            let start = i * geometry.shift;
            audio.samples[start..start + geometry.length].to_vec()
        })
        .collect();
    Framed {
        frames,
        geometry,
        short_input: audio.len() < geometry.length,
    }
}
