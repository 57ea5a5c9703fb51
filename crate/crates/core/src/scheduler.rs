//! Step-size policy for the relaxed asynchronous update and the
//! delay-driven dynamic multiplier.

use std::collections::VecDeque;

use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 5;

/// Mean delays at or below this many seconds leave the multiplier at 1.
pub const MULTIPLIER_FLOOR_DELAY: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StepPolicy {
    /// Step of both the backward and the forward operator.
    pub eta: f64,
    pub eta_min: f64,
    /// Relaxation constant in (0, 1).
    pub c: f64,
    /// Staleness bound (in updates) the relaxation is sized for.
    pub tau_max: usize,
    pub dynamic: bool,
    pub window: usize,
}

impl StepPolicy {
    pub fn new(eta: f64, eta_min: f64, c: f64, tau_max: usize) -> Self {
        Self {
            eta,
            eta_min,
            c,
            tau_max,
            dynamic: false,
            window: DEFAULT_WINDOW,
        }
    }

    pub fn with_dynamic(mut self, dynamic: bool) -> Self {
        self.dynamic = dynamic;
        self
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    /// Upper end of the admissible relaxation interval, `c / (2τ/√T + 1)`.
    pub fn km_cap(&self, t_count: usize) -> f64 {
        self.c / (2.0 * self.tau_max as f64 / (t_count as f64).sqrt() + 1.0)
    }

    /// Checks the relaxation interval and `η ∈ (0, 2/L)`.
    pub fn validate(&self, t_count: usize, lipschitz: f64) -> Result<()> {
        if t_count == 0 {
            return Err(Error::Config("task count must be positive".into()));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::Config(format!("c must lie in (0, 1), got {}", self.c)));
        }
        if !(self.eta_min > 0.0) {
            return Err(Error::Config(format!("eta_min must be > 0, got {}", self.eta_min)));
        }
        if self.window == 0 {
            return Err(Error::Config("delay window must be positive".into()));
        }
        let cap = self.km_cap(t_count);
        if self.eta_min > cap {
            return Err(Error::Config(format!(
                "eta_min={} exceeds the relaxation cap c/(2*tau_max/sqrt(T)+1) = {cap:.6} \
                 (c={}, tau_max={}, T={t_count})",
                self.eta_min, self.c, self.tau_max
            )));
        }
        let upper = 2.0 / lipschitz;
        if !(self.eta > 0.0 && self.eta < upper) {
            return Err(Error::Config(format!(
                "eta={} outside (0, 2/L) = (0, {upper:.6e})",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Relaxation step `η_k`, held at the top of `[η_min, c/(2τ/√T + 1)]`.
pub fn km_step_size(policy: &StepPolicy, t_count: usize) -> Result<f64> {
    if t_count == 0 {
        return Err(Error::Config("task count must be positive".into()));
    }
    let cap = policy.km_cap(t_count);
    if policy.eta_min > cap {
        return Err(Error::Config(format!(
            "eta_min={} exceeds the relaxation cap {cap:.6}",
            policy.eta_min
        )));
    }
    Ok(cap.max(policy.eta_min))
}

/// Recent communication delays (seconds) seen by one task.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayHistory {
    pub task_id: usize,
    ring: VecDeque<f64>,
    window: usize,
    seen: u64,
    /// Time of the most recent sample.
    pub now: f64,
}

impl DelayHistory {
    pub fn new(task_id: usize, window: usize) -> Self {
        Self {
            task_id,
            ring: VecDeque::with_capacity(window),
            window: window.max(1),
            seen: 0,
            now: 0.0,
        }
    }

    pub fn record_delay(&mut self, nu: f64) -> Result<()> {
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(Error::Argument(format!(
                "delay for task {} must be a finite non-negative number, got {nu}",
                self.task_id
            )));
        }
        if self.ring.len() == self.window {
            self.ring.pop_front();
        }
        self.ring.push_back(nu);
        self.seen += 1;
        Ok(())
    }

    pub fn record_delay_at(&mut self, nu: f64, now: f64) -> Result<()> {
        self.record_delay(nu)?;
        self.now = now;
        Ok(())
    }

    pub fn samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.ring.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// Mean of the stored samples; 0 when empty.
    pub fn mean(&self) -> f64 {
        if self.ring.is_empty() {
            0.0
        } else {
            self.ring.iter().sum::<f64>() / self.ring.len() as f64
        }
    }
}

/// `log₁₀(max(ν̄, 10))`; exactly 1 whenever the mean delay is at most 10 s.
pub fn dynamic_multiplier(history: &DelayHistory) -> f64 {
    history.mean().max(MULTIPLIER_FLOOR_DELAY).log10()
}
