//! Discrete-event engines on an integer-nanosecond virtual clock.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{ns_to_secs, secs_to_ns, DelayStreams, Setup, UpdateEvent};
use crate::error::Result;
use crate::numerics::DenseMatrix;
use crate::operators::BlockCandidate;
use crate::trace::RunResult;

/// A task's in-flight activation: read done, write not yet applied.
struct InFlight {
    request_ns: u64,
    k_read: usize,
    candidate: BlockCandidate,
    delay_secs: f64,
}

pub(super) fn amtl(setup: &Setup<'_>) -> Result<RunResult> {
    let problem = setup.problem();
    let (d, t_count) = (problem.dim(), problem.task_count());
    let cost = setup.config.cost_model;
    let prox_ns = cost.prox_ns(d, t_count);
    let iterations = setup.config.iterations_per_task;

    let mut v = DenseMatrix::zeros(d, t_count);
    let initial_objective = setup.objective_at(&v)?;
    let mut streams = DelayStreams::new(&setup.config.delay_model, t_count);
    let mut histories = setup.histories();
    let mut done = vec![0usize; t_count];
    let mut in_flight: Vec<Option<InFlight>> = (0..t_count).map(|_| None).collect();
    let mut events = Vec::with_capacity(iterations * t_count);
    // (write time, task): pops the earliest write, lowest task id first on ties
    let mut queue: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    let mut k = 0usize;

    let activate = |t: usize,
                        now: u64,
                        v: &DenseMatrix,
                        k: usize,
                        streams: &mut DelayStreams,
                        queue: &mut BinaryHeap<Reverse<(u64, usize)>>|
     -> Result<InFlight> {
        let p = setup.bf.backward(v)?;
        let candidate = setup.bf.forward_block(&p.column(t), t)?;
        let delay_secs = streams.next(t);
        let task = problem.task(t);
        let write = now + prox_ns + cost.grad_ns(task.samples(), d) + secs_to_ns(delay_secs);
        queue.push(Reverse((write, t)));
        Ok(InFlight {
            request_ns: now,
            k_read: k,
            candidate,
            delay_secs,
        })
    };

    for (t, slot) in in_flight.iter_mut().enumerate() {
        *slot = Some(activate(t, 0, &v, k, &mut streams, &mut queue)?);
    }

    while let Some(Reverse((now, t))) = queue.pop() {
        let flight = in_flight[t].take().expect("queued task has an activation in flight");
        let staleness = k - flight.k_read;
        setup.check_staleness(t, k, staleness)?;
        let next = setup.relax(
            &v.column(t),
            &flight.candidate,
            &mut histories[t],
            flight.delay_secs,
            ns_to_secs(now),
            k,
        )?;
        v.set_column(t, &next);
        let objective_after = if (k + 1).is_multiple_of(setup.sample_every) {
            Some(setup.objective_at(&v)?)
        } else {
            None
        };
        events.push(UpdateEvent {
            task_id: t,
            k,
            request_ns: flight.request_ns,
            write_ns: now,
            staleness,
            objective_after,
        });
        k += 1;
        done[t] += 1;
        // the task re-activates as soon as its write lands
        if done[t] < iterations {
            in_flight[t] = Some(activate(t, now, &v, k, &mut streams, &mut queue)?);
        }
    }
    setup.finish(v, events, initial_objective)
}

pub(super) fn smtl(setup: &Setup<'_>) -> Result<RunResult> {
    let problem = setup.problem();
    let (d, t_count) = (problem.dim(), problem.task_count());
    let cost = setup.config.cost_model;
    let prox_ns = cost.prox_ns(d, t_count);

    let mut v = DenseMatrix::zeros(d, t_count);
    let initial_objective = setup.objective_at(&v)?;
    let mut streams = DelayStreams::new(&setup.config.delay_model, t_count);
    let mut histories = setup.histories();
    let mut events = Vec::with_capacity(setup.config.iterations_per_task * t_count);
    let mut now = 0u64;
    let mut k = 0usize;

    for _round in 0..setup.config.iterations_per_task {
        let p = setup.bf.backward(&v)?;
        let mut arrivals = Vec::with_capacity(t_count);
        for t in 0..t_count {
            let candidate = setup.bf.forward_block(&p.column(t), t)?;
            let delay_secs = streams.next(t);
            let arrive = now
                + prox_ns
                + cost.grad_ns(problem.task(t).samples(), d)
                + secs_to_ns(delay_secs);
            arrivals.push((candidate, delay_secs, arrive));
        }
        // barrier: the server proceeds only once the slowest task reports
        let round_end = arrivals.iter().map(|a| a.2).max().unwrap_or(now);
        for (t, (candidate, delay_secs, _)) in arrivals.into_iter().enumerate() {
            let next = setup.relax(
                &v.column(t),
                &candidate,
                &mut histories[t],
                delay_secs,
                ns_to_secs(round_end),
                k,
            )?;
            v.set_column(t, &next);
            let objective_after = if (k + 1).is_multiple_of(setup.sample_every) {
                Some(setup.objective_at(&v)?)
            } else {
                None
            };
            events.push(UpdateEvent {
                task_id: t,
                k,
                request_ns: now,
                write_ns: round_end,
                staleness: 0,
                objective_after,
            });
            k += 1;
        }
        now = round_end;
    }
    setup.finish(v, events, initial_objective)
}
