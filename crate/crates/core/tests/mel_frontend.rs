mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speechtok::audio::AudioBuffer;
use speechtok::features::{stack_frames, unstack_frames};
use speechtok::loss::{mel_mae, multiscale_mel_loss, reconstruction_loss, total_loss, LossWeights};
use speechtok::mel::{compute_mel, mel_band_center, MelConfig, MelSpectrogram};
use speechtok::synth;
use speechtok::Error;

fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()
}

fn small_cfg(center: bool) -> MelConfig {
    MelConfig {
        n_fft: 64,
        hop: 16,
        n_mels: 12,
        sample_rate: 8000,
        fmin: 0.0,
        fmax: 4000.0,
        center,
        ..MelConfig::default()
    }
}

#[test]
fn matches_direct_dft_oracle() {
    for center in [true, false] {
        let cfg = small_cfg(center);
        for seed in 0..4 {
            let samples = noise(seed, 300 + 17 * seed as usize);
            let audio = AudioBuffer::new(samples.clone(), 8000).unwrap();
            let mel = compute_mel(&audio, &cfg).unwrap();
            let expect = common::oracle_log_mel(&samples, &cfg);
            assert_eq!(mel.n_frames(), expect.len());
            for (t, row) in expect.iter().enumerate() {
                for (b, v) in row.iter().enumerate() {
                    assert!((mel.frame(t)[b] - v).abs() < 1e-6, "center={center} t={t} b={b}");
                }
            }
        }
    }
}

#[test]
fn default_config_matches_oracle_on_short_clip() {
    let cfg = MelConfig::default();
    let samples = noise(9, 1200);
    let mel = compute_mel(&AudioBuffer::new(samples.clone(), 16_000).unwrap(), &cfg).unwrap();
    let expect = common::oracle_log_mel(&samples, &cfg);
    assert_eq!(mel.n_frames(), 8);
    for (t, row) in expect.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            assert!((mel.frame(t)[b] - v).abs() < 1e-6);
        }
    }
}

#[test]
fn band_centres_agree_with_oracle_scale() {
    let cfg = MelConfig::default();
    for b in 0..cfg.n_mels {
        let ours = mel_band_center(&cfg, b);
        assert!((ours - common::band_center(&cfg, b)).abs() < 1e-9 * ours.max(1.0));
    }
}

#[test]
fn sine_at_band_centre_peaks_in_that_band() {
    let cfg = MelConfig::default();
    for band in [20, 30, 40, 50, 60, 70, 75] {
        let f = common::band_center(&cfg, band);
        // The oracle's filterbank response to this tone puts the peak in `band`.
        let resp: Vec<f64> = (0..cfg.n_mels).map(|b| common::band_weight(&cfg, b, f)).collect();
        let oracle_peak = (0..cfg.n_mels).max_by(|&a, &b| resp[a].total_cmp(&resp[b])).unwrap();
        assert_eq!(oracle_peak, band);

        // Padded edge frames fold the tone onto itself, so with centring only
        // frames whose window lies inside the signal are checked.
        let audio = synth::sine(f, 0.5, 0.5, cfg.sample_rate).unwrap();
        for center in [false, true] {
            let c = MelConfig { center, ..cfg.clone() };
            let mel = compute_mel(&audio, &c).unwrap();
            let interior = |t: usize| !center || (t * c.hop >= c.n_fft / 2 && t * c.hop + c.n_fft / 2 <= audio.len());
            let mut checked = 0;
            for t in (0..mel.n_frames()).filter(|&t| interior(t)) {
                let row = mel.frame(t);
                let peak = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
                assert_eq!(peak, band, "tone at {f:.1} Hz, center={center}, frame {t}");
                checked += 1;
            }
            assert!(checked > 30);
        }
    }
}

#[test]
fn frame_counts_follow_explicit_enumeration() {
    for center in [true, false] {
        for len in [0usize, 1, 63, 64, 65, 79, 80, 81, 400, 1000, 16_000] {
            let cfg = MelConfig {
                center,
                ..MelConfig::default()
            };
            let mut count = 0;
            let mut start = 0;
            loop {
                let fits = if center { start < len } else { start + cfg.n_fft <= len };
                if !fits {
                    break;
                }
                count += 1;
                start += cfg.hop;
            }
            assert_eq!(cfg.frame_count(len), count, "center={center} len={len}");
            if len > 1 {
                let audio = AudioBuffer::new(noise(1, len), 16_000).unwrap();
                assert_eq!(compute_mel(&audio, &cfg).unwrap().n_frames(), count);
            }
        }
    }
    let one_second = AudioBuffer::new(vec![0.0; 16_000], 16_000).unwrap();
    assert_eq!(compute_mel(&one_second, &MelConfig::default()).unwrap().n_frames(), 100);
}

#[test]
fn rejects_bad_input() {
    assert!(matches!(AudioBuffer::new(vec![0.0, f64::NAN], 16_000), Err(Error::InvalidSample { index: 1, .. })));
    let empty = AudioBuffer::new(vec![], 16_000).unwrap();
    assert!(matches!(compute_mel(&empty, &MelConfig::default()), Err(Error::EmptyInput(_))));
    let wrong_rate = AudioBuffer::new(vec![0.0; 1000], 8000).unwrap();
    assert!(matches!(compute_mel(&wrong_rate, &MelConfig::default()), Err(Error::InvalidConfig(_))));
}

#[test]
fn stacking_round_trips_and_divides_rate() {
    let audio = synth::sinusoid_mix(2, 1.0, 16_000).unwrap();
    let mel = compute_mel(&audio, &MelConfig::default()).unwrap();
    let stacked = stack_frames(&mel, 8).unwrap();
    assert_eq!(stacked.n_frames(), 12);
    assert_eq!(stacked.dim(), 640);
    assert_eq!(stacked.frame_rate(), 12.5);
    for t in 0..stacked.n_frames() {
        let expect: Vec<f64> = (0..8).flat_map(|k| mel.frame(8 * t + k).to_vec()).collect();
        assert_eq!(stacked.vector(t), expect.as_slice());
    }
    let back = unstack_frames(&stacked, mel.config_id()).unwrap();
    assert_eq!(back.n_frames(), 96);
    assert_eq!(back.frame_rate(), 100.0);
    assert_eq!(back.data(), &mel.data()[..96 * 80]);
}

fn random_mel(rng: &mut ChaCha8Rng, t: usize, m: usize) -> (Vec<Vec<f64>>, MelSpectrogram) {
    let rows: Vec<Vec<f64>> = (0..t).map(|_| (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
    let mel = MelSpectrogram::from_rows(&rows, 100.0, "cfg").unwrap();
    (rows, mel)
}

#[test]
fn reconstruction_loss_matches_elementwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (t, m) = (rng.gen_range(1..6), rng.gen_range(1..5));
        let (g, gt) = random_mel(&mut rng, t, m);
        let (c, coarse) = random_mel(&mut rng, t, m);
        let (r, refined) = random_mel(&mut rng, t, m);
        let (a1, a2) = common::oracle_l1_l2(&g, &c);
        let (b1, b2) = common::oracle_l1_l2(&g, &r);
        let got = reconstruction_loss(&gt, &[coarse.clone(), refined]).unwrap();
        assert!((got - (a1 + a2 + b1 + b2)).abs() < 1e-9);
        assert!((mel_mae(&gt, &coarse).unwrap() - a1).abs() < 1e-12);
        assert_eq!(reconstruction_loss(&gt, &[gt.clone()]).unwrap(), 0.0);
        assert_eq!(mel_mae(&gt, &gt).unwrap(), 0.0);
    }
}

#[test]
fn reconstruction_loss_rejects_mismatches() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (_, a) = random_mel(&mut rng, 3, 4);
    let (_, b) = random_mel(&mut rng, 2, 4);
    assert!(matches!(reconstruction_loss(&a, &[b]), Err(Error::ShapeMismatch(_))));
    let other = MelSpectrogram::new(a.data().to_vec(), 4, 100.0, "other").unwrap();
    assert!(matches!(reconstruction_loss(&a, &[other]), Err(Error::ShapeMismatch(_))));
    assert!(matches!(reconstruction_loss(&a, &[]), Err(Error::EmptyInput(_))));
}

#[test]
fn multiscale_loss_is_sum_of_scales() {
    let gt = synth::sinusoid_mix(5, 0.3, 16_000).unwrap();
    let recon = synth::sinusoid_mix(6, 0.3, 16_000).unwrap();
    let scales = MelConfig::multiscale_defaults();
    assert_eq!(scales.len(), 2);
    assert_eq!((scales[0].n_fft, scales[0].hop), (1024, 256));
    assert_eq!((scales[1].n_fft, scales[1].hop), (512, 128));
    let mut expect = 0.0;
    for s in &scales {
        let g = common::oracle_log_mel(gt.samples(), s);
        let r = common::oracle_log_mel(recon.samples(), s);
        let (l1, l2) = common::oracle_l1_l2(&g, &r);
        expect += l1 + l2;
    }
    let got = multiscale_mel_loss(&gt, &recon, &scales).unwrap();
    assert!((got - expect).abs() < 1e-6 * expect.max(1.0), "{got} vs {expect}");
    assert_eq!(multiscale_mel_loss(&gt, &gt, &scales).unwrap(), 0.0);
}

#[test]
fn total_loss_weights() {
    let w = LossWeights::default();
    assert_eq!((w.recon, w.llm, w.commit), (1.0, 1.0, 0.25));
    assert_eq!(total_loss(2.0, 3.0, 4.0, w).unwrap(), 6.0);
    let bad = LossWeights { commit: -1.0, ..w };
    assert!(matches!(total_loss(1.0, 1.0, 1.0, bad), Err(Error::InvalidConfig(_))));
}

#[test]
fn wav_round_trip_is_quantised_to_16_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tone.wav");
    let audio = synth::sine(440.0, 0.5, 0.1, 16_000).unwrap();
    audio.write_wav(&path).unwrap();
    let back = AudioBuffer::read_wav(&path).unwrap();
    assert_eq!(back.len(), audio.len());
    for (a, b) in audio.samples().iter().zip(back.samples()) {
        assert!((a - b).abs() < 1.0 / 16_000.0);
    }
}
