//! MFCC pipeline, fixed so that features are bit-stable:
//! pre-emphasis 0.97 → Hamming → |FFT|² (zero-padded to a power of two) →
//! 30 triangular mel filters on [0, Nyquist] → ln with floor 1e-10 →
//! orthonormal DCT-II → coefficients 0..22.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{frame_signal, AudioBuffer, FeatureMatrix, FrameGeometry, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use crate::tensor::Tensor;

pub const PRE_EMPHASIS: f64 = 0.97;
pub const NUM_MEL_FILTERS: usize = 30;
pub const LOG_FLOOR: f64 = 1e-10;
pub const MIN_SAMPLE_RATE: u32 = 8000;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Precomputed window, filterbank, DCT basis and FFT plan for one sample rate.
pub struct Mfcc<T: Scalar> {
    sample_rate: u32,
    geometry: FrameGeometry,
    nfft: usize,
    window: Vec<T>,
    /// `NUM_MEL_FILTERS × (nfft/2 + 1)` weights.
    filters: Vec<Vec<T>>,
    centers_hz: Vec<f64>,
    /// `FEATURE_DIM × NUM_MEL_FILTERS` orthonormal DCT-II rows.
    dct: Vec<Vec<T>>,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Scalar> Mfcc<T> {
    pub fn new(sample_rate: u32) -> Result<Self> {
        if sample_rate < MIN_SAMPLE_RATE {
            return Err(Error::config(format!(
                "sample rate {} Hz is below the supported minimum of {} Hz",
                sample_rate, MIN_SAMPLE_RATE
            )));
        }
        let geometry = FrameGeometry::for_rate(sample_rate);
        let len = geometry.length;
        let nfft = len.next_power_of_two();
        let two_pi = std::f64::consts::PI * 2.0;
        let window = (0..len)
            .map(|n| lit(0.54 - 0.46 * (two_pi * n as f64 / (len - 1) as f64).cos()))
            .collect();

        let bins = nfft / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let mel_max = hz_to_mel(nyquist);
        let step = mel_max / (NUM_MEL_FILTERS + 1) as f64;
        let mut filters = Vec::with_capacity(NUM_MEL_FILTERS);
        let mut centers_hz = Vec::with_capacity(NUM_MEL_FILTERS);
        for j in 0..NUM_MEL_FILTERS {
            let (left, center, right) = (j as f64 * step, (j + 1) as f64 * step, (j + 2) as f64 * step);
            centers_hz.push(mel_to_hz(center));
            let row = (0..bins)
                .map(|k| {
                    let mel = hz_to_mel(k as f64 * sample_rate as f64 / nfft as f64);
                    let w = if mel > left && mel <= center {
                        (mel - left) / (center - left)
                    } else if mel > center && mel < right {
                        (right - mel) / (right - center)
                    } else {
                        0.0
                    };
                    lit(w)
                })
                .collect();
            filters.push(row);
        }

        let m = NUM_MEL_FILTERS as f64;
        let dct = (0..FEATURE_DIM)
            .map(|k| {
                let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
                (0..NUM_MEL_FILTERS)
                    .map(|j| lit(scale * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / m).cos()))
                    .collect()
            })
            .collect();

        let fft = FftPlanner::new().plan_fft_forward(nfft);
        Ok(Self {
            sample_rate,
            geometry,
            nfft,
            window,
            filters,
            centers_hz,
            dct,
            fft,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn geometry(&self) -> FrameGeometry {
        self.geometry
    }

    pub fn fft_size(&self) -> usize {
        self.nfft
    }

    pub fn filter_centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn filters(&self) -> &[Vec<T>] {
        &self.filters
    }

    /// Pre-emphasized, Hamming-windowed frame (before zero padding).
    pub fn windowed(&self, frame: &[T]) -> Vec<T> {
        let k: T = lit(PRE_EMPHASIS);
        (0..frame.len())
            .map(|n| {
                let prev = if n == 0 { frame[0] } else { frame[n - 1] };
                (frame[n] - k * prev) * self.window[n]
            })
            .collect()
    }

    /// Power spectrum `|X[k]|²` for `k = 0..=nfft/2`.
    pub fn power_spectrum(&self, frame: &[T]) -> Vec<T> {
        let mut buf: Vec<Complex<T>> = self
            .windowed(frame)
            .into_iter()
            .map(|v| Complex::new(v, T::zero()))
            .collect();
        buf.resize(self.nfft, Complex::new(T::zero(), T::zero()));
        self.fft.process(&mut buf);
        buf[..self.nfft / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
    }

    /// Mel filterbank energies (linear, before the log).
    pub fn mel_energies(&self, frame: &[T]) -> Vec<T> {
        let power = self.power_spectrum(frame);
        self.filters
            .iter()
            .map(|w| w.iter().zip(&power).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn cepstra(&self, frame: &[T]) -> Vec<T> {
        let floor: T = lit(LOG_FLOOR);
        let logs: Vec<T> = self.mel_energies(frame).into_iter().map(|e| e.max(floor).ln()).collect();
        self.dct
            .iter()
            .map(|row| row.iter().zip(&logs).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn compute(&self, audio: &AudioBuffer<T>, session_id: &str) -> Result<FeatureMatrix<T>> {
        if audio.sample_rate != self.sample_rate {
            return Err(Error::config(format!(
                "extractor built for {} Hz given {} Hz audio",
                self.sample_rate, audio.sample_rate
            )));
        }
        let framed = frame_signal(audio);
        if framed.short_input {
            log::warn!("session {}: audio shorter than one frame, no features", session_id);
        }
        let mut data = Vec::with_capacity(framed.frames.len() * FEATURE_DIM);
        for frame in &framed.frames {
            data.extend(self.cepstra(frame));
        }
        let frames = Tensor::new(&[framed.frames.len(), FEATURE_DIM], data)?;
        FeatureMatrix::new(session_id, frames)
    }
}

pub fn mfcc<T: Scalar>(audio: &AudioBuffer<T>, session_id: &str) -> Result<FeatureMatrix<T>> {
    Mfcc::new(audio.sample_rate)?.compute(audio, session_id)
}
