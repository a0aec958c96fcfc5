use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<T> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Scalar> AudioBuffer<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Validation("audio contains non-finite samples".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_sec(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Reads a 16-bit PCM WAV file. Multi-channel files are reduced to channel 0.
pub fn read_wav<T: Scalar>(path: &Path) -> Result<AudioBuffer<T>> {
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Format(format!(
            "{}: only 16-bit PCM WAV is supported ({:?}, {} bits)",
            path.display(),
            spec.sample_format,
            spec.bits_per_sample
        )));
    }
    let channels = spec.channels.max(1) as usize;
    if channels > 1 {
        log::warn!(
            "{}: {} channels, using channel 0 only",
            path.display(),
            channels
        );
    }
    let scale: T = lit(1.0 / 32768.0);
    let mut samples = Vec::with_capacity(reader.len() as usize / channels);
    for (i, s) in reader.samples::<i16>().enumerate() {
        let s = s.map_err(|e| wav_error(path, e))?;
        if i % channels == 0 {
            samples.push(lit::<T>(s as f64) * scale);
        }
    }
    AudioBuffer::new(samples, spec.sample_rate)
}

pub fn write_wav<T: Scalar>(path: &Path, audio: &AudioBuffer<T>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &s in &audio.samples {
        let v = (s.to_f64_lossless().clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(|e| wav_error(path, e))?;
    }
    w.finalize().map_err(|e| wav_error(path, e))
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {}", path.display(), other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let samples: Vec<f64> = (0..800).map(|i| (i as f64 * 0.05).sin() * 0.5).collect();
        let a = AudioBuffer::new(samples.clone(), 16000).unwrap();
        write_wav(&path, &a).unwrap();
        let b: AudioBuffer<f64> = read_wav(&path).unwrap();
        assert_eq!(b.sample_rate, 16000);
        assert_eq!(b.len(), 800);
        for (x, y) in samples.iter().zip(&b.samples) {
            assert!((x - y).abs() < 1.0 / 16000.0);
        }
    }

    #[test]
    fn stereo_keeps_channel_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for i in 0..10i16 {
            w.write_sample(i * 100).unwrap();
            w.write_sample(-1000).unwrap();
        }
        w.finalize().unwrap();
        let b: AudioBuffer<f64> = read_wav(&path).unwrap();
        assert_eq!(b.len(), 10);
        assert_eq!(b.samples[3], 300.0 / 32768.0);
    }

    #[test]
    fn missing_file_is_io_error() {
        let r: Result<AudioBuffer<f64>> = read_wav(Path::new("/nonexistent/x.wav"));
        assert!(matches!(r, Err(Error::Io { .. })));
    }
}
