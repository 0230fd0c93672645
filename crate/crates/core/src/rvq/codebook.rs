use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// How the assignment mean enters the codeword update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmaMode {
    /// `c <- (1 - beta) * (alpha * c + mean(assigned))`; unassigned entries get `(1 - beta) * alpha * c`.
    #[default]
    PaperLiteral,
    /// `c <- (1 - beta) * (alpha * c + (1 - alpha) * mean(assigned))`; unassigned entries get `(1 - beta) * c`.
    StandardEma,
}

/// Per-entry running sums of the vectors assigned during one step.
///
/// Vectors are accumulated in the order they are added, so a caller that adds
/// them in ascending sample order gets the same bits at any thread count.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignments {
    dim: usize,
    sums: Vec<f64>,
    counts: Vec<usize>,
}

impl Assignments {
    pub fn new(size: usize, dim: usize) -> Self {
        Self {
            dim,
            sums: vec![0.0; size * dim],
            counts: vec![0; size],
        }
    }

    pub fn add(&mut self, entry: usize, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::shape(format!(
                "assigned vector has dimension {}, codebook has {}",
                vector.len(),
                self.dim
            )));
        }
        if entry >= self.counts.len() {
            return Err(Error::config(format!("entry {entry} outside codebook of size {}", self.counts.len())));
        }
        let row = &mut self.sums[entry * self.dim..(entry + 1) * self.dim];
        for (s, v) in row.iter_mut().zip(vector) {
            *s += v;
        }
        self.counts[entry] += 1;
        Ok(())
    }

    pub fn count(&self, entry: usize) -> usize {
        self.counts[entry]
    }

    pub fn mean(&self, entry: usize) -> Option<Vec<f64>> {
        let n = self.counts[entry];
        (n > 0).then(|| {
            self.sums[entry * self.dim..(entry + 1) * self.dim]
                .iter()
                .map(|s| s / n as f64)
                .collect()
        })
    }
}

/// One quantizer layer: `K x D` codewords with EMA state and usage counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    vectors: Vec<f64>,
    size: usize,
    dim: usize,
    ema_decay: f64,
    norm_beta: f64,
    usage_counts: Vec<u64>,
    cluster_size_ema: Vec<f64>,
}

impl Codebook {
    /// `vectors` is row-major `size x dim`.
    pub fn new(vectors: Vec<f64>, dim: usize, ema_decay: f64, norm_beta: f64) -> Result<Self> {
        if dim == 0 || vectors.is_empty() {
            return Err(Error::config("codebook must have at least one entry of positive dimension"));
        }
        if vectors.len() % dim != 0 {
            return Err(Error::shape(format!("{} values is not a whole number of {dim}-dim codewords", vectors.len())));
        }
        if !(0.0..=1.0).contains(&ema_decay) {
            return Err(Error::config(format!("ema_decay must lie in [0, 1], got {ema_decay}")));
        }
        if !(0.0..1.0).contains(&norm_beta) {
            return Err(Error::config(format!("norm_beta must lie in [0, 1), got {norm_beta}")));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("codewords must be finite"));
        }
        let size = vectors.len() / dim;
        Ok(Self {
            vectors,
            size,
            dim,
            ema_decay,
            norm_beta,
            usage_counts: vec![0; size],
            cluster_size_ema: vec![0.0; size],
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], ema_decay: f64, norm_beta: f64) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::shape("ragged codeword rows"));
        }
        Self::new(rows.concat(), dim, ema_decay, norm_beta)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ema_decay(&self) -> f64 {
        self.ema_decay
    }

    pub fn norm_beta(&self) -> f64 {
        self.norm_beta
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn codeword(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.dim..(j + 1) * self.dim]
    }

    pub fn usage_counts(&self) -> &[u64] {
        &self.usage_counts
    }

    pub fn cluster_size_ema(&self) -> &[f64] {
        &self.cluster_size_ema
    }

    pub fn set_usage_counts(&mut self, counts: Vec<u64>) -> Result<()> {
        if counts.len() != self.size {
            return Err(Error::shape(format!("{} usage counters for {} entries", counts.len(), self.size)));
        }
        self.usage_counts = counts;
        Ok(())
    }

    pub fn set_norm_beta(&mut self, beta: f64) -> Result<()> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::config(format!("norm_beta must lie in [0, 1), got {beta}")));
        }
        self.norm_beta = beta;
        Ok(())
    }

    pub fn max_norm(&self) -> f64 {
        self.vectors
            .chunks_exact(self.dim)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Squared Euclidean distance from `x` to every codeword.
    pub fn distances(&self, x: &[f64]) -> Vec<f64> {
        self.vectors
            .chunks_exact(self.dim)
            .map(|c| c.iter().zip(x).map(|(a, b)| (b - a) * (b - a)).sum())
            .collect()
    }

    /// Index of the closest codeword; ties go to the lowest index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in self.vectors.chunks_exact(self.dim).enumerate() {
            let d: f64 = c.iter().zip(x).map(|(a, b)| (b - a) * (b - a)).sum();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }

    /// EMA re-estimation of every codeword from this step's assignments,
    /// followed by the `(1 - beta)` norm constraint.
    ///
    /// Assigned entries have their usage counter reset; all others age by one step.
    pub fn ema_update(&mut self, assignments: &Assignments, mode: EmaMode) -> Result<()> {
        if assignments.dim != self.dim || assignments.counts.len() != self.size {
            return Err(Error::shape(format!(
                "assignments are {}x{}, codebook is {}x{}",
                assignments.counts.len(),
                assignments.dim,
                self.size,
                self.dim
            )));
        }
        let alpha = self.ema_decay;
        for j in 0..self.size {
            let n = assignments.counts[j];
            let row = &mut self.vectors[j * self.dim..(j + 1) * self.dim];
            let sums = &assignments.sums[j * self.dim..(j + 1) * self.dim];
            match (n, mode) {
                (0, EmaMode::PaperLiteral) => row.iter_mut().for_each(|c| *c *= alpha),
                (0, EmaMode::StandardEma) => {}
                (n, EmaMode::PaperLiteral) => {
                    for (c, s) in row.iter_mut().zip(sums) {
                        *c = *c * alpha + s / n as f64;
                    }
                }
                (n, EmaMode::StandardEma) => {
                    for (c, s) in row.iter_mut().zip(sums) {
                        *c = *c * alpha + (1.0 - alpha) * (s / n as f64);
                    }
                }
            }
            self.cluster_size_ema[j] = alpha * self.cluster_size_ema[j] + (1.0 - alpha) * n as f64;
            if n > 0 {
                self.usage_counts[j] = 0;
            } else {
                self.usage_counts[j] = self.usage_counts[j].saturating_add(1);
            }
        }
        self.apply_norm_constraint();
        Ok(())
    }

    /// Scale every codeword by `(1 - beta)`.
    pub fn apply_norm_constraint(&mut self) {
        if self.norm_beta == 0.0 {
            return;
        }
        let scale = 1.0 - self.norm_beta;
        self.vectors.iter_mut().for_each(|c| *c *= scale);
    }

    /// Overwrite every entry unused for at least `dead_threshold` steps with a
    /// vector drawn uniformly (with replacement) from `batch`.
    ///
    /// `batch` is row-major with this codebook's dimension. Dead entries are
    /// visited in ascending order, one draw each. Returns the replaced indices.
    pub fn restart_dead_entries(&mut self, batch: &[f64], dead_threshold: u64, rng_seed: u64) -> Result<Vec<usize>> {
        let dead: Vec<usize> = (0..self.size)
            .filter(|&j| self.usage_counts[j] >= dead_threshold)
            .collect();
        if dead.is_empty() {
            return Ok(dead);
        }
        if batch.len() % self.dim != 0 {
            return Err(Error::shape(format!("batch length {} not a multiple of dim {}", batch.len(), self.dim)));
        }
        let n = batch.len() / self.dim;
        if n == 0 {
            return Err(Error::EmptyInput(format!("{} dead entries but the batch is empty", dead.len())));
        }
        let mut rng = seed::rng(rng_seed);
        for &j in &dead {
            let pick = rng.gen_range(0..n);
            self.vectors[j * self.dim..(j + 1) * self.dim].copy_from_slice(&batch[pick * self.dim..(pick + 1) * self.dim]);
            self.usage_counts[j] = 0;
            self.cluster_size_ema[j] = 0.0;
        }
        Ok(dead)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book(rows: &[Vec<f64>], alpha: f64, beta: f64) -> Codebook {
        Codebook::from_rows(rows, alpha, beta).unwrap()
    }

    #[test]
    fn alpha_zero_single_assignment_copies_vector() {
        let mut cb = book(&[vec![9.0, 9.0], vec![1.0, 1.0]], 0.0, 0.0);
        let mut a = Assignments::new(2, 2);
        a.add(0, &[3.0, -4.0]).unwrap();
        cb.ema_update(&a, EmaMode::PaperLiteral).unwrap();
        assert_eq!(cb.codeword(0), &[3.0, -4.0]);
    }

    #[test]
    fn literal_mode_closed_form() {
        let mut cb = book(&[vec![1.0, 0.0]], 0.99, 0.01);
        let mut a = Assignments::new(1, 2);
        a.add(0, &[3.0, 0.0]).unwrap();
        a.add(0, &[5.0, 0.0]).unwrap();
        cb.ema_update(&a, EmaMode::PaperLiteral).unwrap();
        assert!((cb.codeword(0)[0] - 4.9401).abs() < 1e-12);
        assert_eq!(cb.codeword(0)[1], 0.0);
    }

    #[test]
    fn beta_zero_is_plain_ema() {
        let mut cb = book(&[vec![2.0], vec![4.0]], 0.5, 0.0);
        let mut a = Assignments::new(2, 1);
        a.add(0, &[6.0]).unwrap();
        let mut std_cb = cb.clone();
        cb.ema_update(&a, EmaMode::PaperLiteral).unwrap();
        assert_eq!(cb.codeword(0), &[7.0]);
        assert_eq!(cb.codeword(1), &[2.0]);
        std_cb.ema_update(&a, EmaMode::StandardEma).unwrap();
        assert_eq!(std_cb.codeword(0), &[4.0]);
        assert_eq!(std_cb.codeword(1), &[4.0]);
    }

    #[test]
    fn usage_counters_track_idle_steps() {
        let mut cb = book(&[vec![0.0], vec![1.0]], 0.9, 0.0);
        let mut a = Assignments::new(2, 1);
        a.add(1, &[1.0]).unwrap();
        cb.ema_update(&a, EmaMode::StandardEma).unwrap();
        cb.ema_update(&a, EmaMode::StandardEma).unwrap();
        assert_eq!(cb.usage_counts(), &[2, 0]);
    }

    #[test]
    fn dimension_mismatch() {
        let mut a = Assignments::new(2, 2);
        assert!(matches!(a.add(0, &[1.0]), Err(Error::ShapeMismatch(_))));
        let mut cb = book(&[vec![0.0; 3]], 0.9, 0.0);
        assert!(matches!(cb.ema_update(&a, EmaMode::PaperLiteral), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn norm_constraint_scales() {
        let mut cb = book(&[vec![2.0, 0.0]], 0.9, 0.5);
        cb.apply_norm_constraint();
        assert_eq!(cb.codeword(0), &[1.0, 0.0]);
        let mut id = book(&[vec![2.0, 0.0]], 0.9, 0.0);
        id.apply_norm_constraint();
        assert_eq!(id.codeword(0), &[2.0, 0.0]);
    }

    #[test]
    fn restart_nothing_dead() {
        let mut cb = book(&[vec![0.0], vec![1.0]], 0.9, 0.0);
        let before = cb.clone();
        assert!(cb.restart_dead_entries(&[], 3, 1).unwrap().is_empty());
        assert_eq!(cb, before);
    }

    #[test]
    fn restart_single_candidate() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 0.0]).collect();
        let mut cb = book(&rows, 0.9, 0.0);
        let mut counts = vec![0; 8];
        counts[5] = 10;
        cb.set_usage_counts(counts).unwrap();
        let replaced = cb.restart_dead_entries(&[7.5, -1.0], 10, 3).unwrap();
        assert_eq!(replaced, vec![5]);
        assert_eq!(cb.codeword(5), &[7.5, -1.0]);
        assert_eq!(cb.usage_counts()[5], 0);
        assert_eq!(cb.codeword(4), &[4.0, 0.0]);
    }

    #[test]
    fn restart_with_empty_batch_fails_only_when_dead() {
        let mut cb = book(&[vec![0.0]], 0.9, 0.0);
        cb.set_usage_counts(vec![4]).unwrap();
        assert!(matches!(cb.restart_dead_entries(&[], 4, 0), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn invalid_hyperparameters() {
        assert!(Codebook::new(vec![0.0], 1, 1.5, 0.0).is_err());
        assert!(Codebook::new(vec![0.0], 1, 0.5, 1.0).is_err());
        assert!(Codebook::new(vec![], 1, 0.5, 0.0).is_err());
        assert!(Codebook::new(vec![f64::NAN], 1, 0.5, 0.0).is_err());
    }
}
