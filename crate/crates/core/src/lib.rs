//! Multi-codebook speech tokenizer toolkit.
//!
//! * [`mel`], [`features`], [`loss`]: log-mel frontend, 12.5 Hz frame stacking and reconstruction losses.
//! * [`rvq`]: residual vector quantizer with EMA codebook learning, norm
//!   constraint, layerwise dropout, dead-entry restart and Gumbel selection.
//! * [`stream`]: interleaved text/audio token streams, special tokens and loss masks.
//! * [`datapipe`]: punctuation segmentation and interleaved record assembly.
//! * [`metrics`]: WER, codebook statistics and perplexity-comparison evaluation.
//! * [`formats`]: the AFV1 / RVQ1 / ATK1 binary files.
//! * [`cli`]: the `speechtok` batch command line.

pub mod audio;
pub mod cli;
pub mod datapipe;
pub mod error;
pub mod features;
pub mod formats;
pub mod loss;
pub mod mel;
pub mod metrics;
pub mod rvq;
pub mod seed;
pub mod stream;
pub mod synth;

pub use error::{Error, Result};
