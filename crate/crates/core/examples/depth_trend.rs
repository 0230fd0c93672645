//! Reconstruction error against RVQ depth on synthetic speech-like audio.
//!
//! For each seed, trains one 8-layer stack on stacked log-mel features of
//! sinusoid-plus-noise audio, then encodes and decodes the corpus with the
//! first 1, 4, 6 and 8 layers.
//!
//! `cargo run --release --example depth_trend -- [seconds] [seed...]`

use std::time::Instant;

use speechtok::rvq::{evaluate, train_rvq, EmaMode, InitMethod, TrainConfig};
use speechtok::synth;

fn main() -> speechtok::Result<()> {
    let mut args = std::env::args().skip(1);
    let seconds: f64 = args.next().map_or(170.0, |s| s.parse().expect("seconds must be a number"));
    let mut seeds: Vec<u64> = args.map(|s| s.parse().expect("seeds must be integers")).collect();
    if seeds.is_empty() {
        seeds = vec![1, 2, 3];
    }

    for seed in seeds {
        let t = Instant::now();
        let corpus = synth::feature_corpus(seed, seconds, 25)?;
        // Full-batch steps: with the whole corpus in every batch, each step is one
        // damped Lloyd iteration per layer.
        let mut cfg = TrainConfig {
            codebook_sizes: vec![128; 8],
            ema_mode: EmaMode::StandardEma,
            ema_decay: 0.5,
            norm_beta: 0.0,
            init: InitMethod::KmeansPlusPlus,
            epochs: 10,
            batch_size: corpus.len(),
            dead_threshold: 8,
            ..TrainConfig::default()
        };
        cfg.reseed(seed);
        let (stack, _) = train_rvq(&cfg.init_stack(&corpus)?, &corpus, &cfg)?;

        let mut prev: Option<f64> = None;
        print!("seed {seed}:");
        for depth in [1, 4, 6, 8] {
            let summary = evaluate(&stack.truncated(depth)?, &corpus)?;
            match prev {
                Some(p) => print!("  {depth} layers {:.4} (-{:.1}%)", summary.feature_mae, 100.0 * (p - summary.feature_mae) / p),
                None => print!("  {depth} layer {:.4}", summary.feature_mae),
            }
            prev = Some(summary.feature_mae);
        }
        println!("  [{} vectors, {:.1}s]", corpus.iter().map(|f| f.n_frames()).sum::<usize>(), t.elapsed().as_secs_f64());
    }
    Ok(())
}
