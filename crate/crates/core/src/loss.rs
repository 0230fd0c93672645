//! Reconstruction losses over mel spectrograms and the weighted total loss.

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::mel::{compute_mel, MelConfig, MelSpectrogram};

/// Loss weights `(recon, llm, commit)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub recon: f64,
    pub llm: f64,
    pub commit: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            recon: 1.0,
            llm: 1.0,
            commit: 0.25,
        }
    }
}

fn mean_l1_l2(gt: &[f64], recon: &[f64]) -> (f64, f64) {
    let n = gt.len() as f64;
    let (l1, l2) = gt.iter().zip(recon).fold((0.0, 0.0), |(a, b), (g, r)| {
        let d = g - r;
        (a + d.abs(), b + d * d)
    });
    (l1 / n, l2 / n)
}

/// Sum over reconstructions of mean-L1 plus mean-L2 against `gt`.
///
/// With `recons = [coarse, refined]` this is the coarse/refined L1+L2 reconstruction loss.
pub fn reconstruction_loss(gt: &MelSpectrogram, recons: &[MelSpectrogram]) -> Result<f64> {
    if recons.is_empty() {
        return Err(Error::EmptyInput("no reconstructions given".into()));
    }
    let mut total = 0.0;
    for r in recons {
        gt.same_shape(r)?;
        if r.config_id() != gt.config_id() {
            return Err(Error::shape(format!(
                "config mismatch: '{}' vs '{}'",
                gt.config_id(),
                r.config_id()
            )));
        }
        if gt.data().is_empty() {
            continue;
        }
        let (l1, l2) = mean_l1_l2(gt.data(), r.data());
        total += l1 + l2;
    }
    Ok(total)
}

/// Sum of single-scale reconstruction losses over the given STFT configurations.
pub fn multiscale_mel_loss(gt: &AudioBuffer, recon: &AudioBuffer, scales: &[MelConfig]) -> Result<f64> {
    if scales.is_empty() {
        return Err(Error::EmptyInput("no mel scales given".into()));
    }
    if gt.len() != recon.len() || gt.sample_rate() != recon.sample_rate() {
        return Err(Error::shape(format!(
            "audio {} samples @ {} Hz vs {} samples @ {} Hz",
            gt.len(),
            gt.sample_rate(),
            recon.len(),
            recon.sample_rate()
        )));
    }
    scales.iter().try_fold(0.0, |acc, cfg| {
        let g = compute_mel(gt, cfg)?;
        let r = compute_mel(recon, cfg)?;
        Ok(acc + reconstruction_loss(&g, std::slice::from_ref(&r))?)
    })
}

/// Mean absolute difference over all cells.
pub fn mel_mae(gt: &MelSpectrogram, recon: &MelSpectrogram) -> Result<f64> {
    gt.same_shape(recon)?;
    Ok(mean_abs(gt.data(), recon.data()))
}

pub(crate) fn mean_abs(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// `w.recon * recon + w.llm * llm + w.commit * commit`.
///
/// The LLM term is supplied by the caller; pass 0 when no text model is attached.
pub fn total_loss(recon_loss: f64, llm_loss: f64, commit_loss: f64, w: LossWeights) -> Result<f64> {
    for (name, v) in [("recon", w.recon), ("llm", w.llm), ("commit", w.commit)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::config(format!("loss weight {name} must be finite and >= 0, got {v}")));
        }
    }
    Ok(w.recon * recon_loss + w.llm * llm_loss + w.commit * commit_loss)
}
