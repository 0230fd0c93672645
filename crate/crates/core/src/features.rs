//! Frame stacking: concatenating `s` consecutive mel frames into one feature
//! vector lowers a 100 fps mel to the 12.5 Hz tokenizer rate at `s = 8`.

use crate::error::{Error, Result};
use crate::mel::MelSpectrogram;

pub const DEFAULT_STACK_FACTOR: usize = 8;

/// `T' x D` matrix of feature vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    data: Vec<f64>,
    n_frames: usize,
    dim: usize,
    frame_rate: f64,
    stack_factor: usize,
}

impl FeatureSequence {
    pub fn new(data: Vec<f64>, dim: usize, frame_rate: f64, stack_factor: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("feature dimension must be positive"));
        }
        if stack_factor == 0 {
            return Err(Error::config("stack_factor must be >= 1"));
        }
        if !(frame_rate > 0.0) {
            return Err(Error::config("frame_rate must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(Error::shape(format!("{} values is not a whole number of {dim}-dim vectors", data.len())));
        }
        Ok(Self {
            n_frames: data.len() / dim,
            data,
            dim,
            frame_rate,
            stack_factor,
        })
    }

    /// Build from explicit vectors (stack factor 1).
    pub fn from_vectors(vectors: &[Vec<f64>], frame_rate: f64) -> Result<Self> {
        let dim = vectors.first().map_or(0, Vec::len);
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::shape("ragged feature vectors"));
        }
        if dim == 0 {
            return Err(Error::EmptyInput("no feature vectors".into()));
        }
        Self::new(vectors.concat(), dim, frame_rate, 1)
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn is_empty(&self) -> bool {
        self.n_frames == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn stack_factor(&self) -> usize {
        self.stack_factor
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn vector(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }
}

/// Concatenate groups of `stack_factor` consecutive mel frames; a trailing partial group is dropped.
pub fn stack_frames(mel: &MelSpectrogram, stack_factor: usize) -> Result<FeatureSequence> {
    if stack_factor < 1 {
        return Err(Error::config("stack_factor must be >= 1"));
    }
    let groups = mel.n_frames() / stack_factor;
    let dim = mel.n_mels() * stack_factor;
    let data = mel.data()[..groups * dim].to_vec();
    Ok(FeatureSequence {
        data,
        n_frames: groups,
        dim,
        frame_rate: mel.frame_rate() / stack_factor as f64,
        stack_factor,
    })
}

/// Inverse of [`stack_frames`]: split every vector back into `stack_factor` mel frames.
pub fn unstack_frames(features: &FeatureSequence, config_id: impl Into<String>) -> Result<MelSpectrogram> {
    let s = features.stack_factor;
    if features.dim % s != 0 {
        return Err(Error::shape(format!("dim {} not divisible by stack factor {s}", features.dim)));
    }
    MelSpectrogram::new(
        features.data.clone(),
        features.dim / s,
        features.frame_rate * s as f64,
        config_id,
    )
}

/// Cut a sequence into consecutive instances of `len` vectors (the remainder forms a shorter last instance).
pub fn split_instances(feats: &FeatureSequence, len: usize) -> Result<Vec<FeatureSequence>> {
    let len = len.max(1);
    feats
        .data()
        .chunks(len * feats.dim())
        .map(|c| FeatureSequence::new(c.to_vec(), feats.dim(), feats.frame_rate(), feats.stack_factor()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_mel(frames: usize, bands: usize) -> MelSpectrogram {
        let data = (0..frames * bands).map(|i| i as f64).collect();
        MelSpectrogram::new(data, bands, 100.0, "ramp").unwrap()
    }

    #[test]
    fn hundred_frames_to_twelve_and_a_half_hz() {
        let feats = stack_frames(&ramp_mel(100, 80), 8).unwrap();
        assert_eq!(feats.n_frames(), 12);
        assert_eq!(feats.dim(), 640);
        assert_eq!(feats.frame_rate(), 12.5);
    }

    #[test]
    fn stack_one_is_identity() {
        let mel = ramp_mel(5, 3);
        let feats = stack_frames(&mel, 1).unwrap();
        assert_eq!(feats.n_frames(), 5);
        assert_eq!(feats.data(), mel.data());
        assert_eq!(feats.frame_rate(), 100.0);
    }

    #[test]
    fn trailing_partial_group_dropped() {
        let mel = ramp_mel(7, 2);
        let feats = stack_frames(&mel, 4).unwrap();
        assert_eq!(feats.n_frames(), 1);
        assert_eq!(feats.vector(0), &mel.data()[..8]);
    }

    #[test]
    fn zero_stack_factor_rejected() {
        assert!(matches!(stack_frames(&ramp_mel(4, 2), 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn unstack_restores_prefix() {
        let mel = ramp_mel(19, 3);
        let feats = stack_frames(&mel, 4).unwrap();
        let back = unstack_frames(&feats, "ramp").unwrap();
        assert_eq!(back.n_frames(), 16);
        assert_eq!(back.data(), &mel.data()[..16 * 3]);
        assert_eq!(back.frame_rate(), 100.0);
    }
}
