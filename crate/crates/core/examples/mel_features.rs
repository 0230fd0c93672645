//! Log-mel features of a synthetic clip, before and after 8x frame stacking.
//!
//! `cargo run --example mel_features -- [out.wav]` also writes the clip.

use speechtok::features::{stack_frames, unstack_frames, DEFAULT_STACK_FACTOR};
use speechtok::loss::{mel_mae, multiscale_mel_loss};
use speechtok::mel::{compute_mel, mel_band_center, MelConfig};
use speechtok::synth;

fn main() -> speechtok::Result<()> {
    let cfg = MelConfig::default();
    let clip = synth::sinusoid_mix(7, 2.0, cfg.sample_rate)?;
    if let Some(path) = std::env::args().nth(1) {
        clip.write_wav(&path)?;
        println!("wrote {path}");
    }

    let mel = compute_mel(&clip, &cfg)?;
    println!(
        "{:.1} s at {} Hz -> {} frames x {} mels ({} fps)",
        clip.duration_s(),
        clip.sample_rate(),
        mel.n_frames(),
        mel.n_mels(),
        mel.frame_rate()
    );

    // Loudest band per 100 ms, with its centre frequency.
    for t in (0..mel.n_frames()).step_by(10) {
        let frame = mel.frame(t);
        let (band, level) = frame
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (b, &v)| if v > best.1 { (b, v) } else { best });
        println!("  t={:>4.1}s  peak band {band:>2} (~{:>6.0} Hz)  ln E = {level:>6.2}", t as f64 / mel.frame_rate(), mel_band_center(&cfg, band));
    }

    let stacked = stack_frames(&mel, DEFAULT_STACK_FACTOR)?;
    println!("stacked: {} vectors of {} at {} fps", stacked.n_frames(), stacked.dim(), stacked.frame_rate());
    let back = unstack_frames(&stacked, cfg.id())?;
    let kept = speechtok::mel::MelSpectrogram::new(mel.data()[..back.data().len()].to_vec(), mel.n_mels(), mel.frame_rate(), cfg.id())?;
    println!("unstack round trip MAE: {}", mel_mae(&kept, &back)?);

    let other = synth::sinusoid_mix(8, 2.0, cfg.sample_rate)?;
    let scales = MelConfig::multiscale_defaults();
    println!("multi-scale loss vs itself: {}", multiscale_mel_loss(&clip, &clip, &scales)?);
    println!("multi-scale loss vs another clip: {:.3}", multiscale_mel_loss(&clip, &other, &scales)?);
    Ok(())
}
