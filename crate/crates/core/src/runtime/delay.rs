use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Simulated communication delay: `offset + U[0, jitter_scale)` seconds,
/// optionally scaled per task to model a slow link.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayModel {
    pub offset: f64,
    pub jitter_scale: f64,
    pub seed: u64,
    /// Multiplicative slowdown for individual tasks.
    pub task_factors: BTreeMap<usize, f64>,
}

impl DelayModel {
    pub fn new(offset: f64, jitter_scale: f64, seed: u64) -> Self {
        Self {
            offset,
            jitter_scale,
            seed,
            task_factors: BTreeMap::new(),
        }
    }

    pub fn none(seed: u64) -> Self {
        Self::new(0.0, 0.0, seed)
    }

    pub fn with_slow_task(mut self, task: usize, factor: f64) -> Self {
        self.task_factors.insert(task, factor);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.offset >= 0.0 && self.offset.is_finite()) {
            return Err(Error::Config(format!("delay offset must be >= 0, got {}", self.offset)));
        }
        if !(self.jitter_scale >= 0.0 && self.jitter_scale.is_finite()) {
            return Err(Error::Config(format!(
                "delay jitter must be >= 0, got {}",
                self.jitter_scale
            )));
        }
        if let Some((t, f)) = self.task_factors.iter().find(|(_, f)| !(**f >= 0.0 && f.is_finite())) {
            return Err(Error::Config(format!("slowdown factor {f} for task {t} must be >= 0")));
        }
        Ok(())
    }

    pub fn factor(&self, task: usize) -> f64 {
        self.task_factors.get(&task).copied().unwrap_or(1.0)
    }
}

/// One draw from the delay model; advances `rng`.
pub fn sample_delay(model: &DelayModel, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random();
    model.offset + u * model.jitter_scale
}

/// Independent per-task delay streams. Task `t` always sees the same
/// sequence for a given seed, whichever engine drives it.
#[derive(Debug, Clone)]
pub struct DelayStreams {
    model: DelayModel,
    rngs: Vec<ChaCha8Rng>,
}

impl DelayStreams {
    pub fn new(model: &DelayModel, t_count: usize) -> Self {
        let rngs = (0..t_count)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
                rng.set_stream(t as u64);
                rng
            })
            .collect();
        Self {
            model: model.clone(),
            rngs,
        }
    }

    /// Next delay in seconds for `task`.
    pub fn next(&mut self, task: usize) -> f64 {
        sample_delay(&self.model, &mut self.rngs[task]) * self.model.factor(task)
    }

    /// Splits into one owned stream per task, for threaded engines.
    pub fn into_task_streams(self) -> Vec<TaskDelayStream> {
        let model = self.model;
        self.rngs
            .into_iter()
            .enumerate()
            .map(|(task, rng)| TaskDelayStream {
                factor: model.factor(task),
                model: model.clone(),
                rng,
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TaskDelayStream {
    model: DelayModel,
    factor: f64,
    rng: ChaCha8Rng,
}

impl TaskDelayStream {
    pub fn next(&mut self) -> f64 {
        sample_delay(&self.model, &mut self.rng) * self.factor
    }
}
