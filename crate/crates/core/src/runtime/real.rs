//! Wall-clock engines: one thread per task against a [`SharedModel`].

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use parking_lot::Mutex;

use super::{DelayStreams, Setup, SharedModel, TaskDelayStream, UpdateEvent};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::operators::BlockCandidate;
use crate::trace::RunResult;

fn elapsed_ns(start: Instant) -> u64 {
    start.elapsed().as_nanos() as u64
}

fn pause(delay_secs: f64, scale: f64) {
    let wall = delay_secs * scale;
    if wall > 0.0 {
        thread::sleep(Duration::from_secs_f64(wall));
    }
}

pub(super) fn amtl(setup: &Setup<'_>) -> Result<RunResult> {
    let problem = setup.problem();
    let v0 = DenseMatrix::zeros(problem.dim(), problem.task_count());
    let initial_objective = setup.objective_at(&v0)?;
    let shared = SharedModel::new(&v0);
    let log: Mutex<Vec<UpdateEvent>> = Mutex::new(Vec::new());
    let abort = AtomicBool::new(false);
    let streams = DelayStreams::new(&setup.config.delay_model, problem.task_count());
    let start = Instant::now();

    let outcomes: Vec<Result<()>> = thread::scope(|s| {
        let handles: Vec<_> = streams
            .into_task_streams()
            .into_iter()
            .enumerate()
            .map(|(t, stream)| {
                let (shared, log, abort) = (&shared, &log, &abort);
                s.spawn(move || {
                    let out = amtl_worker(setup, t, stream, shared, log, abort, start);
                    if out.is_err() {
                        abort.store(true, Ordering::SeqCst);
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("task thread panicked"))
            .collect()
    });
    if let Some(err) = outcomes.into_iter().find_map(Result::err) {
        return Err(err);
    }
    setup.finish(shared.snapshot(), log.into_inner(), initial_objective)
}

fn amtl_worker(
    setup: &Setup<'_>,
    t: usize,
    mut stream: TaskDelayStream,
    shared: &SharedModel,
    log: &Mutex<Vec<UpdateEvent>>,
    abort: &AtomicBool,
    start: Instant,
) -> Result<()> {
    let mut history = setup.histories().swap_remove(t);
    for _ in 0..setup.config.iterations_per_task {
        if abort.load(Ordering::SeqCst) {
            return Ok(());
        }
        let request_ns = elapsed_ns(start);
        let k_read = shared.accepted();
        let p = setup.bf.backward(&shared.snapshot())?;
        let candidate = setup.bf.forward_block(&p.column(t), t)?;
        let delay_secs = stream.next();
        pause(delay_secs, setup.config.real_time_scale);

        let now_secs = start.elapsed().as_secs_f64();
        let next = setup.relax(&shared.column(t), &candidate, &mut history, delay_secs, now_secs, k_read)?;
        let k = shared.write_column(t, next);
        let write_ns = elapsed_ns(start);
        let staleness = k - k_read;
        setup.check_staleness(t, k, staleness)?;
        let objective_after = if (k + 1).is_multiple_of(setup.sample_every) {
            Some(setup.objective_at(&shared.snapshot())?)
        } else {
            None
        };
        log.lock().push(UpdateEvent {
            task_id: t,
            k,
            request_ns,
            write_ns,
            staleness,
            objective_after,
        });
    }
    Ok(())
}

type Reply = (usize, Result<BlockCandidate>, f64);

pub(super) fn smtl(setup: &Setup<'_>) -> Result<RunResult> {
    let problem = setup.problem();
    let t_count = problem.task_count();
    let mut v = DenseMatrix::zeros(problem.dim(), t_count);
    let initial_objective = setup.objective_at(&v)?;
    let streams = DelayStreams::new(&setup.config.delay_model, t_count);
    let mut histories = setup.histories();
    let scale = setup.config.real_time_scale;
    let start = Instant::now();

    let events = thread::scope(|s| -> Result<Vec<UpdateEvent>> {
        let (reply_tx, reply_rx) = mpsc::channel::<Reply>();
        let mut job_txs = Vec::with_capacity(t_count);
        for (t, mut stream) in streams.into_task_streams().into_iter().enumerate() {
            let (job_tx, job_rx) = mpsc::channel::<Arc<DenseMatrix>>();
            job_txs.push(job_tx);
            let reply_tx = reply_tx.clone();
            s.spawn(move || {
                for p in job_rx {
                    let candidate = setup.bf.forward_block(&p.column(t), t);
                    let delay_secs = stream.next();
                    pause(delay_secs, scale);
                    if reply_tx.send((t, candidate, delay_secs)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(reply_tx);

        let mut events = Vec::with_capacity(setup.config.iterations_per_task * t_count);
        let mut k = 0usize;
        for _round in 0..setup.config.iterations_per_task {
            let request_ns = elapsed_ns(start);
            let p = Arc::new(setup.bf.backward(&v)?);
            for tx in &job_txs {
                tx.send(Arc::clone(&p))
                    .map_err(|_| Error::Config("task thread exited early".into()))?;
            }
            let mut replies: Vec<Option<(BlockCandidate, f64)>> = (0..t_count).map(|_| None).collect();
            for _ in 0..t_count {
                let (t, candidate, delay) = reply_rx
                    .recv()
                    .map_err(|_| Error::Config("task thread exited early".into()))?;
                replies[t] = Some((candidate?, delay));
            }
            let write_ns = elapsed_ns(start);
            for (t, reply) in replies.into_iter().enumerate() {
                let (candidate, delay_secs) = reply.expect("every task replied");
                let next = setup.relax(
                    &v.column(t),
                    &candidate,
                    &mut histories[t],
                    delay_secs,
                    start.elapsed().as_secs_f64(),
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
                    request_ns,
                    write_ns,
                    staleness: 0,
                    objective_after,
                });
                k += 1;
            }
        }
        Ok(events)
    })?;
    setup.finish(v, events, initial_objective)
}
