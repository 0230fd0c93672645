//! Seeded synthetic data: sinusoid-plus-noise audio and clustered feature corpora.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr_free::normal;

use crate::audio::AudioBuffer;
use crate::error::Result;
use crate::features::{split_instances, stack_frames, FeatureSequence, DEFAULT_STACK_FACTOR};
use crate::mel::{compute_mel, MelConfig};
use crate::seed;

mod rand_distr_free {
    use rand::Rng;

    /// Standard normal draw (Box-Muller).
    pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Audio made of short notes: each note holds one to three sinusoids
/// (100 Hz to 4 kHz) over a white-noise floor.
pub fn sinusoid_mix(rng_seed: u64, seconds: f64, sample_rate: u32) -> Result<AudioBuffer> {
    let mut rng = seed::rng(rng_seed);
    let n = (seconds * f64::from(sample_rate)).round() as usize;
    let sr = f64::from(sample_rate);
    let mut samples = Vec::with_capacity(n);
    while samples.len() < n {
        let note_len = ((rng.gen_range(0.2..0.6)) * sr) as usize;
        let partials: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..=3))
            .map(|_| (rng.gen_range(100.0..4000.0), rng.gen_range(0.05..0.3), rng.gen_range(0.0..2.0 * PI)))
            .collect();
        let noise = rng.gen_range(0.002..0.05);
        for i in 0..note_len.min(n - samples.len()) {
            let t = i as f64 / sr;
            let tone: f64 = partials
                .iter()
                .map(|&(f, a, ph)| a * (2.0 * PI * f * t + ph).sin())
                .sum();
            samples.push((tone + noise * normal(&mut rng)).clamp(-1.0, 1.0));
        }
    }
    AudioBuffer::new(samples, sample_rate)
}

/// A pure tone.
pub fn sine(freq_hz: f64, amplitude: f64, seconds: f64, sample_rate: u32) -> Result<AudioBuffer> {
    let n = (seconds * f64::from(sample_rate)).round() as usize;
    let sr = f64::from(sample_rate);
    AudioBuffer::new(
        (0..n).map(|i| amplitude * (2.0 * PI * freq_hz * i as f64 / sr).sin()).collect(),
        sample_rate,
    )
}

/// Stacked log-mel features of `seconds` of [`sinusoid_mix`] audio with
/// default settings, cut into instances of `frames_per_instance` vectors.
pub fn feature_corpus(rng_seed: u64, seconds: f64, frames_per_instance: usize) -> Result<Vec<FeatureSequence>> {
    let cfg = MelConfig::default();
    let audio = sinusoid_mix(rng_seed, seconds, cfg.sample_rate)?;
    let feats = stack_frames(&compute_mel(&audio, &cfg)?, DEFAULT_STACK_FACTOR)?;
    split_instances(&feats, frames_per_instance)
}

/// Gaussian clusters: `n_clusters` centres drawn uniformly in `[-scale, scale]^dim`,
/// `per_cluster` points around each with standard deviation `spread`. Points are
/// emitted round-robin over clusters, one instance of `instance_len` vectors at a time.
pub fn cluster_corpus(
    rng_seed: u64,
    n_clusters: usize,
    per_cluster: usize,
    dim: usize,
    scale: f64,
    spread: f64,
    instance_len: usize,
) -> Result<(Vec<Vec<f64>>, Vec<FeatureSequence>)> {
    let mut rng = seed::rng(rng_seed);
    let centers: Vec<Vec<f64>> = (0..n_clusters)
        .map(|_| (0..dim).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect();
    let mut data = Vec::with_capacity(n_clusters * per_cluster * dim);
    for _ in 0..per_cluster {
        for c in &centers {
            data.extend(c.iter().map(|&m| m + spread * normal(&mut rng)));
        }
    }
    let all = FeatureSequence::new(data, dim, 12.5, 1)?;
    Ok((centers, split_instances(&all, instance_len)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_audio() {
        let a = sinusoid_mix(3, 0.5, 16_000).unwrap();
        let b = sinusoid_mix(3, 0.5, 16_000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8000);
        assert!(a.samples().iter().all(|s| s.abs() <= 1.0));
        assert_ne!(a, sinusoid_mix(4, 0.5, 16_000).unwrap());
    }

    #[test]
    fn clusters_shape() {
        let (centers, corpus) = cluster_corpus(1, 4, 10, 3, 5.0, 0.1, 8).unwrap();
        assert_eq!(centers.len(), 4);
        assert_eq!(corpus.iter().map(FeatureSequence::n_frames).sum::<usize>(), 40);
        assert_eq!(corpus.len(), 5);
    }
}
