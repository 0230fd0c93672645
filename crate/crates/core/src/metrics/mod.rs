//! Evaluation metrics: WER, codebook statistics and perplexity-comparison accuracy.

mod codebook;
mod eval;
mod scorers;
mod wer;

pub use codebook::{codebook_utilization, interlayer_mi, token_entropy};
pub use eval::{accuracy, candidate_perplexities, perplexity_compare, EvalRecord, Score, Scorer};
pub use scorers::{BigramScorer, OracleScorer, PluginScorer, RandomScorer};
pub use wer::{edit_distance, wer, wer_str};
