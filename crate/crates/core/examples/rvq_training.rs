//! Train a small residual quantizer on clustered data and watch the step report.
//!
//! Starts from a collapsed codebook (every entry on one cluster centre) so
//! dead-entry restarts have work to do, then prints utilization and error as
//! training proceeds.

use speechtok::rvq::{evaluate, train_rvq, Codebook, DropoutConfig, GumbelConfig, RvqStack, TrainConfig};
use speechtok::synth;

fn main() -> speechtok::Result<()> {
    let (centers, corpus) = synth::cluster_corpus(4, 16, 60, 8, 5.0, 0.2, 12)?;
    let mut cfg = TrainConfig {
        codebook_sizes: vec![16, 8],
        epochs: 6,
        batch_size: 8,
        dead_threshold: 2,
        gumbel: GumbelConfig {
            enabled: true,
            temperature: 0.05,
            seed: 0,
        },
        dropout: DropoutConfig {
            enabled: true,
            keep_prob_per_layer: 0.8,
            ..DropoutConfig::default()
        },
        ..TrainConfig::default()
    };
    cfg.reseed(4);

    let first = Codebook::from_rows(&vec![centers[0].clone(); 16], cfg.ema_decay, cfg.norm_beta)?;
    let second = Codebook::from_rows(&vec![vec![0.0; 8]; 8], cfg.ema_decay, cfg.norm_beta)?;
    let stack = RvqStack::new(vec![first, second])?;
    println!("before: {:?}", evaluate(&stack, &corpus)?);

    let (trained, report) = train_rvq(&stack, &corpus, &cfg)?;
    println!("step  util(l1)  util(l2)  mae     restarted  replace  commit_w");
    for s in report.steps.iter().step_by(6) {
        println!(
            "{:>4}  {:>8.2}  {:>8.2}  {:.4}  {:<9}  {:>7.2}  {:>8.2}",
            s.step, s.utilization[0], s.utilization[1], s.feature_mae, format!("{:?}", s.restarted), s.replace_fraction, s.commit_weight
        );
    }
    let after = evaluate(&trained, &corpus)?;
    println!("after:  mae {:.4}, utilization {:?}", after.feature_mae, after.utilization);
    for n in 1..=trained.n_layers() {
        println!("  first {n} layer(s): mae {:.4}", evaluate(&trained.truncated(n)?, &corpus)?.feature_mae);
    }
    Ok(())
}
