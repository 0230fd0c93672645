//! PCM input: validated sample buffers plus 16-bit WAV and raw float32 readers.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt};

use crate::error::{Error, Result};

/// Mono PCM samples in `[-1, 1]` at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::config("sample_rate must be positive"));
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, s)| !s.is_finite()) {
            return Err(Error::InvalidSample { index, value });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Read a 16-bit PCM mono WAV file.
    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = hound::WavReader::open(path).map_err(|e| match e {
            hound::Error::IoError(io) => Error::io(path, io),
            other => Error::Format(format!("{}: {other}", path.display())),
        })?;
        let spec = reader.spec();
        if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
            return Err(Error::Format(format!(
                "{}: expected 16-bit integer mono WAV, got {} channel(s), {} bits, {:?}",
                path.display(),
                spec.channels,
                spec.bits_per_sample,
                spec.sample_format
            )));
        }
        let samples = reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Self::new(samples, spec.sample_rate)
    }

    /// Write a 16-bit PCM mono WAV file (samples are clipped to `[-1, 1]`).
    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let wrap = |e: hound::Error| match e {
            hound::Error::IoError(io) => Error::io(path, io),
            other => Error::Format(other.to_string()),
        };
        let mut w = hound::WavWriter::create(path, spec).map_err(wrap)?;
        for &s in &self.samples {
            let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
            w.write_sample(v).map_err(wrap)?;
        }
        w.finalize().map_err(wrap)
    }

    /// Read raw little-endian float32 samples; the rate is not stored in the file.
    pub fn read_raw_f32(path: impl AsRef<Path>, sample_rate: u32) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        BufReader::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() % 4 != 0 {
            return Err(Error::Format(format!(
                "{}: raw f32 file length {} is not a multiple of 4",
                path.display(),
                bytes.len()
            )));
        }
        let mut cursor = &bytes[..];
        let mut samples = Vec::with_capacity(bytes.len() / 4);
        while !cursor.is_empty() {
            samples.push(f64::from(cursor.read_f32::<LittleEndian>().map_err(|e| Error::io(path, e))?));
        }
        Self::new(samples, sample_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_zero_rate() {
        assert!(matches!(
            AudioBuffer::new(vec![0.0, f64::NAN], 16000),
            Err(Error::InvalidSample { index: 1, .. })
        ));
        assert!(matches!(AudioBuffer::new(vec![0.0], 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn wav_round_trip_within_quantisation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let samples: Vec<f64> = (0..400).map(|i| (i as f64 * 0.05).sin() * 0.8).collect();
        let audio = AudioBuffer::new(samples.clone(), 16000).unwrap();
        audio.write_wav(&path).unwrap();
        let back = AudioBuffer::read_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 16000);
        for (a, b) in samples.iter().zip(back.samples()) {
            assert!((a - b).abs() < 1.0 / 16000.0);
        }
    }

    #[test]
    fn raw_f32_reader() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.f32");
        let vals = [0.25f32, -0.5, 1.0];
        let bytes: Vec<u8> = vals.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(&path, bytes).unwrap();
        let audio = AudioBuffer::read_raw_f32(&path, 8000).unwrap();
        assert_eq!(audio.samples(), &[0.25, -0.5, 1.0]);
        std::fs::write(&path, [0u8; 5]).unwrap();
        assert!(matches!(AudioBuffer::read_raw_f32(&path, 8000), Err(Error::Format(_))));
    }
}
