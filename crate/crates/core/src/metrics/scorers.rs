//! Built-in scorers and the out-of-process plugin scorer.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::eval::{EvalRecord, Score, Scorer};
use crate::error::{Error, Result};
use crate::seed;

/// Knows the answers: positives score 1 nat per token, everything else 2
/// (reversed when built with [`OracleScorer::anti`]).
#[derive(Debug, Clone)]
pub struct OracleScorer {
    positives: HashSet<(Vec<u32>, Vec<u32>)>,
    inverted: bool,
}

impl OracleScorer {
    pub fn new(records: &[EvalRecord]) -> Self {
        let positives = records
            .iter()
            .filter_map(|r| {
                r.candidates
                    .get(r.positive_index)
                    .map(|c| (r.prefix.clone(), c.clone()))
            })
            .collect();
        Self {
            positives,
            inverted: false,
        }
    }

    pub fn anti(records: &[EvalRecord]) -> Self {
        Self {
            inverted: true,
            ..Self::new(records)
        }
    }
}

impl Scorer for OracleScorer {
    fn score(&mut self, prefix: &[u32], continuation: &[u32]) -> Result<Score> {
        let tokens = continuation.len().max(1);
        let is_pos = self.positives.contains(&(prefix.to_vec(), continuation.to_vec()));
        let per = if is_pos != self.inverted { 1.0 } else { 2.0 };
        Ok(Score {
            nll: per * tokens as f64,
            tokens,
        })
    }
}

/// Independent uniform per-token NLLs in `(0, 1)`.
#[derive(Debug, Clone)]
pub struct RandomScorer {
    rng: seed::Rng,
}

impl RandomScorer {
    pub fn new(seed: u64) -> Self {
        Self { rng: seed::rng(seed) }
    }
}

impl Scorer for RandomScorer {
    fn score(&mut self, _prefix: &[u32], continuation: &[u32]) -> Result<Score> {
        let tokens = continuation.len().max(1);
        Ok(Score {
            nll: self.rng.gen::<f64>() * tokens as f64,
            tokens,
        })
    }
}

/// Add-one smoothed bigram model over token ids.
#[derive(Debug, Clone)]
pub struct BigramScorer {
    pairs: HashMap<(u32, u32), u64>,
    unigrams: HashMap<u32, u64>,
    vocab: u64,
}

impl BigramScorer {
    pub fn train<'a>(corpus: impl IntoIterator<Item = &'a [u32]>) -> Self {
        let mut pairs = HashMap::new();
        let mut unigrams = HashMap::new();
        let mut max_id = 0u32;
        for seq in corpus {
            for w in seq.windows(2) {
                *pairs.entry((w[0], w[1])).or_insert(0) += 1;
                *unigrams.entry(w[0]).or_insert(0) += 1;
            }
            max_id = seq.iter().copied().fold(max_id, u32::max);
        }
        Self {
            pairs,
            unigrams,
            vocab: u64::from(max_id) + 2,
        }
    }

    fn nll(&self, prev: Option<u32>, tok: u32) -> f64 {
        let (pair, ctx) = match prev {
            Some(p) => (
                self.pairs.get(&(p, tok)).copied().unwrap_or(0),
                self.unigrams.get(&p).copied().unwrap_or(0),
            ),
            None => (0, 0),
        };
        -(((pair + 1) as f64) / ((ctx + self.vocab) as f64)).ln()
    }
}

impl Scorer for BigramScorer {
    fn score(&mut self, prefix: &[u32], continuation: &[u32]) -> Result<Score> {
        if continuation.is_empty() {
            return Err(Error::ScorerError("empty continuation".into()));
        }
        let mut prev = prefix.last().copied();
        let mut nll = 0.0;
        for &tok in continuation {
            nll += self.nll(prev, tok);
            prev = Some(tok);
        }
        Ok(Score {
            nll,
            tokens: continuation.len(),
        })
    }
}

#[derive(Serialize)]
struct PluginRequest<'a> {
    prefix: &'a [u32],
    candidate: &'a [u32],
}

#[derive(Deserialize)]
struct PluginResponse {
    nll: f64,
    tokens: usize,
}

/// External scorer speaking line-delimited JSON on stdin/stdout:
/// request `{"prefix": [...], "candidate": [...]}`, response `{"nll": f, "tokens": n}`.
pub struct PluginScorer {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    line: String,
}

impl PluginScorer {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::io(program, e))?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            child,
            stdin,
            stdout,
            line: String::new(),
        })
    }
}

impl Scorer for PluginScorer {
    fn score(&mut self, prefix: &[u32], continuation: &[u32]) -> Result<Score> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::ScorerError("plugin stdin closed".into()))?;
        let mut req = serde_json::to_string(&PluginRequest {
            prefix,
            candidate: continuation,
        })
        .expect("request serialises");
        req.push('\n');
        stdin
            .write_all(req.as_bytes())
            .and_then(|()| stdin.flush())
            .map_err(|e| Error::ScorerError(format!("writing to plugin: {e}")))?;
        self.line.clear();
        let n = self
            .stdout
            .read_line(&mut self.line)
            .map_err(|e| Error::ScorerError(format!("reading from plugin: {e}")))?;
        if n == 0 {
            return Err(Error::ScorerError("plugin closed its output".into()));
        }
        let resp: PluginResponse = serde_json::from_str(self.line.trim())
            .map_err(|e| Error::ScorerError(format!("bad plugin response {:?}: {e}", self.line.trim())))?;
        if !resp.nll.is_finite() || resp.tokens == 0 {
            return Err(Error::ScorerError(format!(
                "plugin returned nll={} tokens={}",
                resp.nll, resp.tokens
            )));
        }
        Ok(Score {
            nll: resp.nll,
            tokens: resp.tokens,
        })
    }
}

impl Drop for PluginScorer {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.wait();
    }
}
