//! Log-mel spectrogram frontend.
//!
//! STFT with a periodic Hann window, power spectrum, Slaney-scale triangular
//! filterbank with Slaney area normalisation, then `ln(max(energy, floor))`.
//! Defaults follow the Whisper conventions: 16 kHz, `n_fft = 400`,
//! `hop = 160`, 80 bands over 0..8000 Hz.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// STFT and filterbank settings for one mel scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub sample_rate: u32,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
    /// Reflect-pad `n_fft / 2` samples on both sides and emit `ceil(len / hop)` frames.
    pub center: bool,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_fft: 400,
            hop: 160,
            n_mels: 80,
            sample_rate: 16_000,
            fmin: 0.0,
            fmax: 8_000.0,
            log_floor: 1e-10,
            center: true,
        }
    }
}

impl MelConfig {
    /// The two default scales used by the multi-scale loss.
    pub fn multiscale_defaults() -> Vec<MelConfig> {
        vec![
            MelConfig {
                n_fft: 1024,
                hop: 256,
                ..Default::default()
            },
            MelConfig {
                n_fft: 512,
                hop: 128,
                ..Default::default()
            },
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.n_fft {
            return Err(Error::config(format!(
                "need 0 < hop <= n_fft, got hop={} n_fft={}",
                self.hop, self.n_fft
            )));
        }
        if self.n_mels == 0 || self.sample_rate == 0 {
            return Err(Error::config("n_mels and sample_rate must be positive"));
        }
        let nyquist = f64::from(self.sample_rate) / 2.0;
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= nyquist) {
            return Err(Error::config(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got fmin={} fmax={}",
                self.fmin, self.fmax
            )));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(Error::config("log_floor must be positive and finite"));
        }
        Ok(())
    }

    /// Stable identifier of the settings; spectrograms are only comparable when these match.
    pub fn id(&self) -> String {
        format!(
            "sr={};n_fft={};hop={};n_mels={};fmin={};fmax={};floor={:e};center={}",
            self.sample_rate, self.n_fft, self.hop, self.n_mels, self.fmin, self.fmax, self.log_floor, self.center
        )
    }

    pub fn frame_rate(&self) -> f64 {
        f64::from(self.sample_rate) / self.hop as f64
    }

    /// Number of STFT frames produced for `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if self.center {
            len.div_ceil(self.hop)
        } else if len < self.n_fft {
            0
        } else {
            (len - self.n_fft) / self.hop + 1
        }
    }
}

/// Time-major matrix of log-mel energies.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    data: Vec<f64>,
    n_frames: usize,
    n_mels: usize,
    frame_rate: f64,
    config_id: String,
}

impl MelSpectrogram {
    pub fn new(data: Vec<f64>, n_mels: usize, frame_rate: f64, config_id: impl Into<String>) -> Result<Self> {
        if n_mels == 0 || !(frame_rate > 0.0) {
            return Err(Error::config("n_mels and frame_rate must be positive"));
        }
        if data.len() % n_mels != 0 {
            return Err(Error::shape(format!(
                "{} values is not a whole number of {n_mels}-band frames",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("mel entries must be finite"));
        }
        Ok(Self {
            n_frames: data.len() / n_mels,
            data,
            n_mels,
            frame_rate,
            config_id: config_id.into(),
        })
    }

    /// Build from explicit rows; handy for small fixtures.
    pub fn from_rows(rows: &[Vec<f64>], frame_rate: f64, config_id: impl Into<String>) -> Result<Self> {
        let n_mels = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_mels) {
            return Err(Error::shape("ragged mel rows"));
        }
        Self::new(rows.concat(), n_mels, frame_rate, config_id)
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn config_id(&self) -> &str {
        &self.config_id
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_mels..(t + 1) * self.n_mels]
    }

    pub(crate) fn same_shape(&self, other: &MelSpectrogram) -> Result<()> {
        if self.n_frames != other.n_frames || self.n_mels != other.n_mels {
            return Err(Error::shape(format!(
                "{}x{} vs {}x{}",
                self.n_frames, self.n_mels, other.n_frames, other.n_mels
            )));
        }
        Ok(())
    }
}

fn hz_to_mel(f: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if f < MIN_LOG_HZ {
        f / F_SP
    } else {
        min_log_mel + (f / MIN_LOG_HZ).ln() / logstep
    }
}

fn mel_to_hz(m: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if m < min_log_mel {
        m * F_SP
    } else {
        MIN_LOG_HZ * (logstep * (m - min_log_mel)).exp()
    }
}

/// Band edge frequencies in Hz: `n_mels + 2` points, band `i` peaks at `edges[i + 1]`.
pub fn mel_band_edges(cfg: &MelConfig) -> Vec<f64> {
    let lo = hz_to_mel(cfg.fmin);
    let hi = hz_to_mel(cfg.fmax);
    let n = cfg.n_mels + 1;
    (0..=n)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / n as f64))
        .collect()
}

/// Centre frequency of mel band `band`.
pub fn mel_band_center(cfg: &MelConfig, band: usize) -> f64 {
    mel_band_edges(cfg)[band + 1]
}

/// `n_mels x (n_fft / 2 + 1)` filterbank, row-major.
pub fn mel_filterbank(cfg: &MelConfig) -> Vec<f64> {
    let n_freqs = cfg.n_fft / 2 + 1;
    let edges = mel_band_edges(cfg);
    let bin_hz = f64::from(cfg.sample_rate) / cfg.n_fft as f64;
    let mut weights = vec![0.0; cfg.n_mels * n_freqs];
    for band in 0..cfg.n_mels {
        let (left, center, right) = (edges[band], edges[band + 1], edges[band + 2]);
        let enorm = 2.0 / (right - left);
        for k in 0..n_freqs {
            let f = k as f64 * bin_hz;
            let rising = (f - left) / (center - left);
            let falling = (right - f) / (right - center);
            weights[band * n_freqs + k] = rising.min(falling).max(0.0) * enorm;
        }
    }
    weights
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Reflect-mode index into a signal of length `len`, mirroring about the edge samples.
fn reflect(index: isize, len: usize) -> Option<usize> {
    if len == 1 {
        return (index == 0).then_some(0);
    }
    let period = 2 * (len as isize - 1);
    let mut i = index.rem_euclid(period);
    if i >= len as isize {
        i = period - i;
    }
    Some(i as usize)
}

/// Compute the log-mel spectrogram of `audio`.
pub fn compute_mel(audio: &AudioBuffer, cfg: &MelConfig) -> Result<MelSpectrogram> {
    cfg.validate()?;
    if audio.is_empty() {
        return Err(Error::EmptyInput("audio buffer has no samples".into()));
    }
    if audio.sample_rate() != cfg.sample_rate {
        return Err(Error::config(format!(
            "audio sample rate {} does not match config {}",
            audio.sample_rate(),
            cfg.sample_rate
        )));
    }
    let samples = audio.samples();
    let len = samples.len();
    let n_frames = cfg.frame_count(len);
    let n_freqs = cfg.n_fft / 2 + 1;
    let window = hann_window(cfg.n_fft);
    let filters = mel_filterbank(cfg);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.n_fft);
    let pad = if cfg.center { (cfg.n_fft / 2) as isize } else { 0 };

    let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut power = vec![0.0; n_freqs];
    let mut out = Vec::with_capacity(n_frames * cfg.n_mels);
    for t in 0..n_frames {
        let start = (t * cfg.hop) as isize - pad;
        for (n, slot) in buf.iter_mut().enumerate() {
            let idx = start + n as isize;
            let x = if (0..len as isize).contains(&idx) {
                samples[idx as usize]
            } else {
                reflect(idx, len).map_or(0.0, |i| samples[i])
            };
            *slot = Complex::new(x * window[n], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for band in 0..cfg.n_mels {
            let row = &filters[band * n_freqs..(band + 1) * n_freqs];
            let energy: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
            out.push(energy.max(cfg.log_floor).ln());
        }
    }
    Ok(MelSpectrogram {
        data: out,
        n_frames,
        n_mels: cfg.n_mels,
        frame_rate: cfg.frame_rate(),
        config_id: cfg.id(),
    })
}
