use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One perplexity-comparison item: a shared prefix and candidate continuations, one of which is correct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub prefix: Vec<u32>,
    pub candidates: Vec<Vec<u32>>,
    #[serde(rename = "positive")]
    pub positive_index: usize,
}

impl EvalRecord {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.len() < 2 {
            return Err(Error::config(format!("need at least 2 candidates, got {}", self.candidates.len())));
        }
        if self.positive_index >= self.candidates.len() {
            return Err(Error::config(format!(
                "positive index {} out of range for {} candidates",
                self.positive_index,
                self.candidates.len()
            )));
        }
        Ok(())
    }
}

/// Total negative log-likelihood of a continuation and the number of tokens it covers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub nll: f64,
    pub tokens: usize,
}

/// A language model seen only through continuation likelihoods.
pub trait Scorer {
    fn score(&mut self, prefix: &[u32], continuation: &[u32]) -> Result<Score>;
}

impl<S: Scorer + ?Sized> Scorer for &mut S {
    fn score(&mut self, prefix: &[u32], continuation: &[u32]) -> Result<Score> {
        (**self).score(prefix, continuation)
    }
}

fn mean_nlls(record: &EvalRecord, scorer: &mut dyn Scorer) -> Result<Vec<f64>> {
    record.validate()?;
    record
        .candidates
        .iter()
        .map(|c| {
            let s = scorer.score(&record.prefix, c)?;
            if !s.nll.is_finite() || s.tokens == 0 {
                return Err(Error::ScorerError(format!(
                    "scorer returned nll={} over {} tokens",
                    s.nll, s.tokens
                )));
            }
            Ok(s.nll / s.tokens as f64)
        })
        .collect()
}

/// Per-token perplexity `exp(nll / tokens)` of every candidate.
pub fn candidate_perplexities(record: &EvalRecord, scorer: &mut dyn Scorer) -> Result<Vec<f64>> {
    Ok(mean_nlls(record, scorer)?.into_iter().map(f64::exp).collect())
}

/// True iff the positive candidate has strictly the lowest perplexity; ties count as wrong.
///
/// Compares mean NLLs, which orders candidates exactly as perplexity does
/// without overflowing `exp`.
pub fn perplexity_compare(record: &EvalRecord, scorer: &mut dyn Scorer) -> Result<bool> {
    let nll = mean_nlls(record, scorer)?;
    let pos = nll[record.positive_index];
    Ok(nll
        .iter()
        .enumerate()
        .all(|(i, &v)| i == record.positive_index || pos < v))
}

/// Fraction of records answered correctly.
pub fn accuracy(records: &[EvalRecord], scorer: &mut dyn Scorer) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no evaluation records".into()));
    }
    let mut correct = 0usize;
    for r in records {
        correct += usize::from(perplexity_compare(r, scorer)?);
    }
    Ok(correct as f64 / records.len() as f64)
}
