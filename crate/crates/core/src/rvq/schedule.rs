use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Unit of VQ replacement. Only whole instances are supported: replacing
/// individual tokens is rejected at validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Instance,
    Token,
}

/// Progressive replacement of continuous features by their quantized
/// version, ramping linearly from `replace_start` to `replace_end`, with a
/// per-stage commitment weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSchedule {
    pub replace_start: f64,
    pub replace_end: f64,
    pub total_steps: u64,
    /// Commitment-loss weight per stage; stages split `0..=total_steps` evenly.
    pub commit_weight_schedule: Vec<f64>,
    pub granularity: Granularity,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        Self {
            replace_start: 0.10,
            replace_end: 1.00,
            total_steps: 1000,
            commit_weight_schedule: vec![0.25],
            granularity: Granularity::Instance,
        }
    }
}

impl TrainingSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.replace_start && self.replace_start <= self.replace_end && self.replace_end <= 1.0) {
            return Err(Error::config(format!(
                "need 0 <= replace_start <= replace_end <= 1, got {} and {}",
                self.replace_start, self.replace_end
            )));
        }
        if self.granularity != Granularity::Instance {
            return Err(Error::config("VQ replacement must be instance-level"));
        }
        if self
            .commit_weight_schedule
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(Error::config("commit weights must be finite and >= 0"));
        }
        Ok(())
    }

    /// Replacement probability at `step`.
    pub fn replace_fraction(&self, step: u64) -> Result<f64> {
        if step > self.total_steps {
            return Err(Error::config(format!(
                "step {step} beyond total_steps {}",
                self.total_steps
            )));
        }
        if self.total_steps == 0 {
            return Ok(self.replace_end);
        }
        let t = step as f64 / self.total_steps as f64;
        Ok(self.replace_start + (self.replace_end - self.replace_start) * t)
    }

    /// Commitment weight of the stage containing `step` (0.25 when no stages are configured).
    pub fn commit_weight(&self, step: u64) -> f64 {
        let n = self.commit_weight_schedule.len();
        if n == 0 {
            return 0.25;
        }
        let stage = if self.total_steps == 0 {
            n - 1
        } else {
            ((step.min(self.total_steps) as u128 * n as u128) / (self.total_steps as u128 + 1)) as usize
        };
        self.commit_weight_schedule[stage.min(n - 1)]
    }
}

/// Mark each of `n_instances` whole instances for replacement by its
/// quantized features, independently with the scheduled probability.
pub fn vq_replacement_gate(schedule: &TrainingSchedule, step: u64, rng_seed: u64, n_instances: usize) -> Result<Vec<bool>> {
    schedule.validate()?;
    let p = schedule.replace_fraction(step)?;
    let mut rng = seed::rng(rng_seed);
    Ok((0..n_instances).map(|_| rng.gen::<f64>() < p).collect())
}
