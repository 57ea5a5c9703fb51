//! Execution engines for the asynchronous (AMTL) and barrier-synchronized
//! (SMTL) protocols, on a simulated clock or on real threads.
//!
//! Every activation of task `t` follows the same three steps:
//!
//! 1. the server computes the backward step `Prox_{ηλg}(V)` on its current
//!    copy and hands column `t` to the task,
//! 2. the task applies the forward step `(I − η∇ℓ_t)` to that column and
//!    sends the result back after its communication delay,
//! 3. the server folds the result into `v_t` with the relaxed KM update.
//!
//! AMTL lets each task cycle through these steps independently, so the
//! server's copy may change between a task's read and its write (that gap,
//! counted in updates, is the staleness). SMTL runs them in lock-step rounds.

mod delay;
mod real;
mod shared;
mod virtual_clock;

use std::fmt;
use std::str::FromStr;

pub use delay::{sample_delay, DelayModel, DelayStreams, TaskDelayStream};
pub use shared::SharedModel;

use crate::error::{Error, Result};
use crate::model::MtlProblem;
use crate::numerics::DenseMatrix;
use crate::operators::{km_update, recover_w, BackwardForward, BlockCandidate};
use crate::scheduler::{dynamic_multiplier, km_step_size, DelayHistory, StepPolicy};
use crate::trace::{ProblemShape, RunResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Amtl,
    Smtl,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Amtl => "amtl",
            Mode::Smtl => "smtl",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "amtl" => Ok(Mode::Amtl),
            "smtl" => Ok(Mode::Smtl),
            other => Err(Error::Argument(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clock {
    /// Discrete-event simulation; fully deterministic.
    Virtual,
    /// One OS thread per task, delays slept in wall time.
    Real,
}

impl fmt::Display for Clock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clock::Virtual => "virtual",
            Clock::Real => "real",
        })
    }
}

/// Simulated compute time on the virtual clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    /// Seconds per `n_t · d` unit of gradient work.
    pub grad_per_flop: f64,
    /// Seconds per `d · T · min(d, T)` unit of SVD work.
    pub prox_per_flop: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            grad_per_flop: 1e-8,
            prox_per_flop: 1e-8,
        }
    }
}

impl CostModel {
    pub fn zero() -> Self {
        Self {
            grad_per_flop: 0.0,
            prox_per_flop: 0.0,
        }
    }

    pub fn grad_ns(&self, samples: usize, dim: usize) -> u64 {
        secs_to_ns(self.grad_per_flop * (samples * dim) as f64)
    }

    pub fn prox_ns(&self, dim: usize, t_count: usize) -> u64 {
        secs_to_ns(self.prox_per_flop * (dim * t_count * dim.min(t_count)) as f64)
    }
}

/// Seconds to whole nanoseconds (rounded).
pub fn secs_to_ns(secs: f64) -> u64 {
    (secs * 1e9).round().max(0.0) as u64
}

pub fn ns_to_secs(ns: u64) -> f64 {
    ns as f64 / 1e9
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub clock: Clock,
    pub iterations_per_task: usize,
    pub delay_model: DelayModel,
    pub step_policy: StepPolicy,
    pub seed: u64,
    pub cost_model: CostModel,
    /// Objective is recorded after every `sample_every`-th update; `None`
    /// means once per `T` updates.
    pub sample_every: Option<usize>,
    /// Wall seconds slept per simulated delay second in real-clock runs.
    pub real_time_scale: f64,
}

impl RunConfig {
    pub fn new(mode: Mode, iterations_per_task: usize, step_policy: StepPolicy, seed: u64) -> Self {
        Self {
            mode,
            clock: Clock::Virtual,
            iterations_per_task,
            delay_model: DelayModel::none(seed),
            step_policy,
            seed,
            cost_model: CostModel::default(),
            sample_every: None,
            real_time_scale: 1e-3,
        }
    }

    pub fn with_delay(mut self, delay_model: DelayModel) -> Self {
        self.delay_model = delay_model;
        self
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn sample_interval(&self, t_count: usize) -> usize {
        self.sample_every.unwrap_or(t_count).max(1)
    }
}

/// One accepted block update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateEvent {
    pub task_id: usize,
    /// Global index of this update, starting at 0.
    pub k: usize,
    pub request_ns: u64,
    pub write_ns: u64,
    /// Updates by other tasks accepted between this task's read and write.
    pub staleness: usize,
    pub objective_after: Option<f64>,
}

impl UpdateEvent {
    pub fn request_time(&self) -> f64 {
        ns_to_secs(self.request_ns)
    }

    pub fn write_time(&self) -> f64 {
        ns_to_secs(self.write_ns)
    }
}

/// Largest staleness over a completed run.
pub fn measure_staleness(events: &[UpdateEvent]) -> usize {
    events.iter().map(|e| e.staleness).max().unwrap_or(0)
}

/// Largest staleness seen by each task.
pub fn staleness_by_task(events: &[UpdateEvent], t_count: usize) -> Vec<usize> {
    let mut out = vec![0; t_count];
    for e in events {
        out[e.task_id] = out[e.task_id].max(e.staleness);
    }
    out
}

/// Validated, run-invariant quantities shared by every engine.
pub(crate) struct Setup<'a> {
    pub bf: BackwardForward<'a>,
    pub eta_k: f64,
    pub sample_every: usize,
    pub config: &'a RunConfig,
}

impl<'a> Setup<'a> {
    fn new(problem: &'a MtlProblem, config: &'a RunConfig) -> Result<Self> {
        if config.iterations_per_task == 0 {
            return Err(Error::Config("iterations_per_task must be >= 1".into()));
        }
        config.delay_model.validate()?;
        let t_count = problem.task_count();
        if let Some(&bad) = config.delay_model.task_factors.keys().find(|&&t| t >= t_count) {
            return Err(Error::Config(format!("slow task {bad} out of range for T={t_count}")));
        }
        let lipschitz = problem.lipschitz()?;
        let policy = &config.step_policy;
        policy.validate(t_count, lipschitz)?;
        let eta_k = km_step_size(policy, t_count)?;
        let bf = BackwardForward::with_lipschitz(problem, policy.eta, lipschitz)?;
        Ok(Self {
            bf,
            eta_k,
            sample_every: config.sample_interval(t_count),
            config,
        })
    }

    pub fn problem(&self) -> &MtlProblem {
        self.bf.problem()
    }

    pub fn tau_max(&self) -> usize {
        self.config.step_policy.tau_max
    }

    /// Objective at the model recovered from `v`.
    pub fn objective_at(&self, v: &DenseMatrix) -> Result<f64> {
        self.problem().objective(&self.bf.backward(v)?)
    }

    /// Relaxed update of `v_t`; records the delay and applies the dynamic
    /// multiplier when enabled.
    pub fn relax(
        &self,
        v_t: &[f64],
        candidate: &BlockCandidate,
        history: &mut DelayHistory,
        delay_secs: f64,
        now_secs: f64,
        k: usize,
    ) -> Result<Vec<f64>> {
        history.record_delay_at(delay_secs, now_secs)?;
        let multiplier = if self.config.step_policy.dynamic {
            dynamic_multiplier(history)
        } else {
            1.0
        };
        let task = candidate.task_id;
        let next = km_update(v_t, candidate, self.eta_k, multiplier).map_err(|e| match e {
            Error::NonFinite { task, .. } => Error::NonFinite { task, k },
            other => other,
        })?;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { task, k });
        }
        Ok(next)
    }

    pub fn check_staleness(&self, task: usize, k: usize, staleness: usize) -> Result<()> {
        if staleness > self.tau_max() {
            return Err(Error::StalenessExceeded {
                task,
                k,
                staleness,
                tau_max: self.tau_max(),
            });
        }
        Ok(())
    }

    pub fn histories(&self) -> Vec<DelayHistory> {
        (0..self.problem().task_count())
            .map(|t| DelayHistory::new(t, self.config.step_policy.window))
            .collect()
    }

    pub fn finish(
        &self,
        final_v: DenseMatrix,
        mut events: Vec<UpdateEvent>,
        initial_objective: f64,
    ) -> Result<RunResult> {
        let problem = self.problem();
        events.sort_by_key(|e| e.k);
        let mut counts = vec![0; problem.task_count()];
        for e in &events {
            counts[e.task_id] += 1;
        }
        let final_w = recover_w(problem, &final_v, self.bf.eta())?;
        let final_objective = problem.objective(&final_w)?;
        Ok(RunResult {
            makespan_ns: events.iter().map(|e| e.write_ns).max().unwrap_or(0),
            measured_tau: measure_staleness(&events),
            final_v,
            final_w,
            events,
            per_task_update_counts: counts,
            final_objective,
            initial_objective,
            config_echo: self.config.clone(),
            shape: ProblemShape::of(problem),
        })
    }
}

/// Runs whichever engine `config.mode` and `config.clock` select.
pub fn run(problem: &MtlProblem, config: &RunConfig) -> Result<RunResult> {
    let setup = Setup::new(problem, config)?;
    match (config.mode, config.clock) {
        (Mode::Amtl, Clock::Virtual) => virtual_clock::amtl(&setup),
        (Mode::Smtl, Clock::Virtual) => virtual_clock::smtl(&setup),
        (Mode::Amtl, Clock::Real) => real::amtl(&setup),
        (Mode::Smtl, Clock::Real) => real::smtl(&setup),
    }
}

pub fn run_amtl(problem: &MtlProblem, config: &RunConfig) -> Result<RunResult> {
    if config.mode != Mode::Amtl {
        return Err(Error::Config("run_amtl requires mode = amtl".into()));
    }
    run(problem, config)
}

pub fn run_smtl(problem: &MtlProblem, config: &RunConfig) -> Result<RunResult> {
    if config.mode != Mode::Smtl {
        return Err(Error::Config("run_smtl requires mode = smtl".into()));
    }
    run(problem, config)
}
