use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::codebook::{Assignments, EmaMode};
use super::schedule::{vq_replacement_gate, TrainingSchedule};
use super::stack::{DropoutConfig, GumbelConfig, InitMethod, QuantizeResult, RvqStack, DEFAULT_CODEBOOK_SIZES};
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::seed;

/// Everything `train_rvq` needs besides the stack and corpus. Also the JSON
/// training-config document (all keys optional).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Layer sizes used when a fresh stack is initialised from the corpus.
    pub codebook_sizes: Vec<usize>,
    pub ema_decay: f64,
    pub norm_beta: f64,
    pub ema_mode: EmaMode,
    pub init: InitMethod,
    pub epochs: usize,
    /// Instances (whole feature sequences) per step.
    pub batch_size: usize,
    /// Steps without any assignment after which an entry is restarted.
    pub dead_threshold: u64,
    pub restart: bool,
    /// Seed for initialisation, restarts and the replacement gate.
    pub seed: u64,
    pub schedule: TrainingSchedule,
    pub gumbel: GumbelConfig,
    pub dropout: DropoutConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            codebook_sizes: DEFAULT_CODEBOOK_SIZES.to_vec(),
            ema_decay: 0.5,
            norm_beta: 1.0 / 3.0,
            ema_mode: EmaMode::PaperLiteral,
            init: InitMethod::Sample,
            epochs: 1,
            batch_size: 8,
            dead_threshold: 256,
            restart: true,
            seed: 0,
            schedule: TrainingSchedule::default(),
            gumbel: GumbelConfig::default(),
            dropout: DropoutConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        self.schedule.validate()?;
        self.gumbel.validate()?;
        self.dropout.validate()
    }

    /// Re-derive every seed from one global seed.
    pub fn reseed(&mut self, global: u64) {
        self.seed = seed::derive(global, "rvq.train");
        self.gumbel.seed = seed::derive(global, "rvq.gumbel");
        self.dropout.seed = seed::derive(global, "rvq.dropout");
    }

    /// Initialise a stack from the first batch of `corpus` with this config's sizes and hyper-parameters.
    pub fn init_stack(&self, corpus: &[FeatureSequence]) -> Result<RvqStack> {
        let dim = corpus_dim(corpus)?;
        let first: Vec<f64> = corpus
            .iter()
            .filter(|f| !f.is_empty())
            .take(self.batch_size)
            .flat_map(|f| f.data().iter().copied())
            .collect();
        RvqStack::init_from_batch(
            &self.codebook_sizes,
            &first,
            dim,
            self.ema_decay,
            self.norm_beta,
            self.init,
            seed::derive(self.seed, "init"),
        )
    }
}

/// Metrics recorded after quantizing one batch (before the codebook update).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: usize,
    /// Mean squared distance between inputs and their quantized vectors.
    pub commit_loss: f64,
    /// Mean absolute difference between inputs and their quantized vectors.
    pub feature_mae: f64,
    /// Distinct indices selected in the batch over codebook size, per layer.
    pub utilization: Vec<f64>,
    /// Fraction of instances the gate marked for VQ replacement.
    pub replace_fraction: f64,
    pub commit_weight: f64,
    /// Entries restarted this step, per layer.
    pub restarted: Vec<usize>,
    /// Largest codeword L2 norm per layer after this step's update.
    pub max_norm: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub steps: Vec<StepRecord>,
}

impl TrainingReport {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.steps
            .iter()
            .map(|s| serde_json::to_string(s).expect("step record serialises") + "\n")
            .collect()
    }
}

/// Deterministic (nearest, all layers) evaluation of a stack over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub vectors: usize,
    pub feature_mae: f64,
    pub commit_loss: f64,
    pub utilization: Vec<f64>,
}

fn corpus_dim(corpus: &[FeatureSequence]) -> Result<usize> {
    let Some(first) = corpus.iter().find(|f| !f.is_empty()) else {
        return Err(Error::EmptyInput("corpus has no feature vectors".into()));
    };
    let dim = first.dim();
    if let Some((i, f)) = corpus.iter().enumerate().find(|(_, f)| f.dim() != dim) {
        return Err(Error::shape(format!("sequence {i} has dimension {}, expected {dim}", f.dim())));
    }
    Ok(dim)
}

fn distinct_fraction(indices: impl Iterator<Item = u32>, size: usize) -> f64 {
    let mut seen = vec![false; size];
    let mut count = 0usize;
    for j in indices {
        if let Some(s) = seen.get_mut(j as usize) {
            if !*s {
                *s = true;
                count += 1;
            }
        }
    }
    count as f64 / size as f64
}

/// Train the stack's codebooks by EMA over `corpus`.
///
/// Each step quantizes one batch of instances (with Gumbel sampling and
/// layerwise dropout when enabled), accumulates every active layer's
/// assignments from the residual that layer saw, applies the EMA update and
/// norm constraint per layer, then restarts dead entries from the batch.
/// Randomness is keyed by (seed, step, sample index), so the result does not
/// depend on the rayon thread count.
pub fn train_rvq(stack: &RvqStack, corpus: &[FeatureSequence], cfg: &TrainConfig) -> Result<(RvqStack, TrainingReport)> {
    cfg.validate()?;
    let dim = corpus_dim(corpus)?;
    if dim != stack.dim() {
        return Err(Error::shape(format!("corpus dimension {dim} vs stack dimension {}", stack.dim())));
    }
    let mut stack = stack.clone();
    let mut report = TrainingReport::default();
    let instances: Vec<&FeatureSequence> = corpus.iter().filter(|f| !f.is_empty()).collect();
    let gate_seed = seed::derive(cfg.seed, "gate");
    let restart_seed = seed::derive(cfg.seed, "restart");
    let n_layers = stack.n_layers();

    let mut step: u64 = 0;
    for epoch in 0..cfg.epochs {
        for batch in instances.chunks(cfg.batch_size) {
            let sched_step = step.min(cfg.schedule.total_steps);
            let gate = vq_replacement_gate(&cfg.schedule, sched_step, seed::mix(gate_seed, &[step]), batch.len())?;
            let inputs: Vec<&[f64]> = batch.iter().flat_map(|f| f.vectors()).collect();
            let results: Vec<QuantizeResult> = {
                let frozen = &stack;
                inputs
                    .par_iter()
                    .enumerate()
                    .map(|(i, x)| frozen.quantize(x, &cfg.gumbel, Some(&cfg.dropout), seed::mix(step, &[i as u64])))
                    .collect::<Result<_>>()?
            };

            let mut commit = 0.0;
            let mut abs_err = 0.0;
            for (x, r) in inputs.iter().zip(&results) {
                for (a, q) in x.iter().zip(&r.quantized) {
                    commit += (a - q) * (a - q);
                    abs_err += (a - q).abs();
                }
            }
            let utilization = (0..n_layers)
                .map(|l| {
                    distinct_fraction(
                        results.iter().filter_map(|r| r.indices[l]),
                        stack.layers()[l].size(),
                    )
                })
                .collect();

            let mut restarted = vec![0; n_layers];
            for (layer, book) in stack.layers_mut().iter_mut().enumerate() {
                let mut assignments = Assignments::new(book.size(), dim);
                let mut seen = Vec::new();
                for (x, r) in inputs.iter().zip(&results) {
                    if let Some(j) = r.indices[layer] {
                        let layer_input = r.layer_input(x, layer);
                        assignments.add(j as usize, layer_input)?;
                        seen.extend_from_slice(layer_input);
                    }
                }
                book.ema_update(&assignments, cfg.ema_mode)?;
                if cfg.restart && !seen.is_empty() {
                    let seed = seed::mix(restart_seed, &[step, layer as u64]);
                    restarted[layer] = book.restart_dead_entries(&seen, cfg.dead_threshold, seed)?.len();
                }
            }

            let n = inputs.len() as f64;
            report.steps.push(StepRecord {
                step,
                epoch,
                commit_loss: commit / n,
                feature_mae: abs_err / (n * dim as f64),
                utilization,
                replace_fraction: gate.iter().filter(|&&g| g).count() as f64 / gate.len() as f64,
                commit_weight: cfg.schedule.commit_weight(sched_step),
                restarted,
                max_norm: stack.layers().iter().map(|b| b.max_norm()).collect(),
            });
            step += 1;
        }
    }
    Ok((stack, report))
}

/// Nearest-codeword reconstruction error and per-layer utilization of `stack` on `corpus`.
pub fn evaluate(stack: &RvqStack, corpus: &[FeatureSequence]) -> Result<EvalSummary> {
    let dim = corpus_dim(corpus)?;
    if dim != stack.dim() {
        return Err(Error::shape(format!("corpus dimension {dim} vs stack dimension {}", stack.dim())));
    }
    let inputs: Vec<&[f64]> = corpus.iter().flat_map(|f| f.vectors()).collect();
    let results: Vec<QuantizeResult> = inputs
        .par_iter()
        .map(|x| stack.quantize_nearest(x))
        .collect::<Result<_>>()?;
    let mut commit = 0.0;
    let mut abs_err = 0.0;
    for (x, r) in inputs.iter().zip(&results) {
        for (a, q) in x.iter().zip(&r.quantized) {
            commit += (a - q) * (a - q);
            abs_err += (a - q).abs();
        }
    }
    let n = inputs.len() as f64;
    let utilization = (0..stack.n_layers())
        .map(|l| distinct_fraction(results.iter().filter_map(|r| r.indices[l]), stack.layers()[l].size()))
        .collect();
    Ok(EvalSummary {
        vectors: inputs.len(),
        feature_mae: abs_err / (n * dim as f64),
        commit_loss: commit / n,
        utilization,
    })
}
