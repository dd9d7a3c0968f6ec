//! The discrete-event engine: event ordering, the run loop, usage sampling,
//! and the wiring between scheduler, mover, and power management.
//!
//! Determinism contract: a run is a pure function of (config, trace). Events
//! at the same instant are processed in a fixed kind order — completions
//! first (they free cores), then migration restarts, then boot completions,
//! then arrivals, with mover ticks always last so the mover sees the settled
//! state — and within one kind in scheduling order. No wall clock, no map
//! iteration order, no thread interleaving can affect the result.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::cluster::{ClusterState, JobId, JobSpec, JobState, ServerId};
use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::metrics::{Collector, SimReport, Totals};
use crate::mover;
use crate::scheduler;

/// Largest accepted time value (~31 million years). Keeps every sum of
/// times comfortably inside u64 and, together with the validated
/// `installed_cores * horizon` bound, keeps the core-second integrals exact.
pub const MAX_TIME: u64 = 1_000_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    JobCompletion {
        job: JobId,
        server: ServerId,
        /// Placement epoch this completion was scheduled under; stale events
        /// (the job was frozen afterwards) are dropped on processing.
        epoch: u64,
    },
    MigrationRestart {
        job: JobId,
        server: ServerId,
    },
    PowerOnComplete {
        server: ServerId,
    },
    JobArrival {
        job: JobId,
    },
    MoverTick,
}

impl EventKind {
    /// Tie-break rank for events at the same instant.
    fn rank(&self) -> u8 {
        match self {
            EventKind::JobCompletion { .. } => 0,
            EventKind::MigrationRestart { .. } => 1,
            EventKind::PowerOnComplete { .. } => 2,
            EventKind::JobArrival { .. } => 3,
            EventKind::MoverTick => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub time: u64,
    /// Insertion sequence; the final tie-breaker, so ordering is total.
    pub seq: u64,
    pub kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.kind.rank(), self.seq).cmp(&(other.time, other.kind.rank(), other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
    pushed: u64,
    popped: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: u64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pushed += 1;
        self.heap.push(Reverse(Event { time, seq, kind }));
    }

    pub fn pop(&mut self) -> Option<Event> {
        let ev = self.heap.pop().map(|Reverse(e)| e);
        if ev.is_some() {
            self.popped += 1;
        }
        ev
    }

    pub fn peek_time(&self) -> Option<u64> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// What actually happened, in processing order. Replayable against the
/// (config, trace) pair that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogEntry {
    Arrival { time: u64, job: JobId },
    Dispatch { time: u64, job: JobId, server: ServerId },
    Complete { time: u64, job: JobId, server: ServerId },
    Freeze { time: u64, job: JobId, from: ServerId, to: ServerId, restart_at: u64 },
    Restart { time: u64, job: JobId, server: ServerId },
    BootRequested { time: u64, server: ServerId, ready_at: u64 },
    BootComplete { time: u64, server: ServerId },
    PowerOff { time: u64, server: ServerId },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    pub entries: Vec<LogEntry>,
}

/// Rejects traces the farm cannot run or that would break accounting.
pub fn validate_trace(config: &SimConfig, trace: &[JobSpec]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(trace.len());
    let mut last_submit = 0u64;
    for job in trace {
        if !seen.insert(job.id) {
            return Err(SimError::Trace(format!("duplicate job id {}", job.id)));
        }
        if job.submit_time < last_submit {
            return Err(SimError::Trace(format!(
                "{} submitted at {} after a job at {last_submit}",
                job.id, job.submit_time
            )));
        }
        last_submit = job.submit_time;
        if job.cores == 0 || job.runtime == 0 {
            return Err(SimError::Trace(format!(
                "{} must need at least one core and one second",
                job.id
            )));
        }
        if job.cores > config.cores_per_server {
            return Err(SimError::Trace(format!(
                "{} needs {} cores but servers have {}",
                job.id, job.cores, config.cores_per_server
            )));
        }
        if job.submit_time > MAX_TIME || job.runtime > MAX_TIME {
            return Err(SimError::Trace(format!("{} exceeds the time range", job.id)));
        }
    }
    Ok(())
}

pub struct Simulation {
    config: SimConfig,
    cluster: ClusterState,
    events: EventQueue,
    collector: Collector,
    next_sample: u64,
    log: Option<EventLog>,
}

impl Simulation {
    pub fn new(config: SimConfig, trace: &[JobSpec]) -> Result<Self> {
        config.validate()?;
        validate_trace(&config, trace)?;
        let mut sim = Simulation {
            cluster: ClusterState::new(config.num_servers, config.cores_per_server, trace),
            events: EventQueue::default(),
            collector: Collector::new(config.num_servers, config.cores_per_server),
            next_sample: 0,
            log: None,
            config,
        };
        for job in trace {
            sim.events
                .push(job.submit_time, EventKind::JobArrival { job: job.id });
        }
        if sim.config.mover_enabled {
            sim.events.push(sim.config.mover_interval, EventKind::MoverTick);
        }
        if sim.config.power_managed() {
            // Nothing has arrived yet; every server starts drained and dark.
            for server in sim.cluster.power_off_drained() {
                sim.record(LogEntry::PowerOff { time: 0, server });
            }
        }
        Ok(sim)
    }

    /// Runs a config on a trace to completion.
    pub fn run(config: SimConfig, trace: &[JobSpec]) -> Result<SimReport> {
        Self::new(config, trace)?.execute().map(|(report, _)| report)
    }

    /// As `run`, but also returns the full event log for replay checking.
    pub fn run_logged(config: SimConfig, trace: &[JobSpec]) -> Result<(SimReport, EventLog)> {
        let mut sim = Self::new(config, trace)?;
        sim.log = Some(EventLog::default());
        sim.execute()
            .map(|(report, log)| (report, log.expect("log was enabled")))
    }

    pub fn cluster(&self) -> &ClusterState {
        &self.cluster
    }

    pub fn pending_events(&self) -> usize {
        self.events.len()
    }

    /// Processes exactly one event. Stepping primitive for tests and
    /// debugging; `run` is the normal entry point.
    pub fn advance(&mut self) -> Result<Event> {
        let ev = self.events.pop().ok_or(SimError::EmptyEventQueue)?;
        let used = self.cluster.used_cores_total();
        let on = self.cluster.powered_on_servers();
        self.collector.advance_to(ev.time, used, on);
        self.cluster.clock = ev.time;
        self.handle(&ev)?;
        Ok(ev)
    }

    fn execute(mut self) -> Result<(SimReport, Option<EventLog>)> {
        let horizon = self.config.horizon;
        log::info!(
            "run start: {}x{} cores, horizon {horizon} s, mover {}",
            self.config.num_servers,
            self.config.cores_per_server,
            if self.config.mover_enabled { "on" } else { "off" }
        );
        while let Some(t) = self.events.peek_time() {
            if t > horizon {
                break;
            }
            self.emit_samples_before(t)?;
            self.advance()?;
        }

        // Tail: integrate the final constant stretch and emit what remains
        // of the sample grid.
        self.emit_samples_before(horizon + 1)?;
        let used = self.cluster.used_cores_total();
        let on = self.cluster.powered_on_servers();
        self.collector.advance_to(horizon, used, on);

        self.cluster.validate()?;
        debug_assert_eq!(
            self.events.pushed,
            self.events.popped + self.events.len() as u64,
            "events leaked"
        );

        // Double-entry CPU accounting: the time-series integral must equal
        // the per-job executed seconds (including partial segments cut off
        // at the horizon) exactly.
        let mut per_job: u64 = 0;
        for job in self.cluster.jobs() {
            let mut executed = job.executed;
            if let JobState::Running { segment_start, .. } = job.state {
                executed += horizon - segment_start;
            }
            per_job += executed * job.spec.cores as u64;
        }
        if per_job != self.collector.used_integral() {
            return Err(SimError::Internal(format!(
                "CPU ledger mismatch: per-job sum {per_job}, time-series integral {}",
                self.collector.used_integral()
            )));
        }

        let totals = Totals {
            completed_jobs: self.cluster.completed_jobs(),
            total_jobs_seen: self.cluster.started_jobs(),
            moved_jobs: self.cluster.moved_jobs(),
            migration_events: self.cluster.migration_events(),
            cumulative_core_seconds: per_job,
            powered_on_server_seconds: self.collector.on_integral(),
        };
        log::info!(
            "run done: {} of {} dispatched jobs completed, {} migrations, {} core-seconds",
            totals.completed_jobs,
            totals.total_jobs_seen,
            totals.migration_events,
            totals.cumulative_core_seconds
        );
        let report = SimReport {
            config: self.config,
            samples: self.collector.into_samples(),
            totals,
        };
        Ok((report, self.log))
    }

    /// Emits every due sample strictly before `t`, using the current state
    /// (nothing changes between events, so the levels are exact).
    fn emit_samples_before(&mut self, t: u64) -> Result<()> {
        while self.next_sample < t && self.next_sample <= self.config.horizon {
            let used = self.cluster.used_cores_total();
            let on = self.cluster.powered_on_servers();
            let queued = self.cluster.queue_len() as u64;
            self.collector.advance_to(self.next_sample, used, on);
            self.collector.record_sample(used, on, queued);
            self.next_sample += self.config.sample_interval;
        }
        Ok(())
    }

    fn record(&mut self, entry: LogEntry) {
        log::trace!("{entry:?}");
        if let Some(log) = &mut self.log {
            log.entries.push(entry);
        }
    }

    fn handle(&mut self, ev: &Event) -> Result<()> {
        let time = ev.time;
        match ev.kind {
            EventKind::JobArrival { job } => {
                self.cluster.enqueue(job)?;
                self.record(LogEntry::Arrival { time, job });
            }
            EventKind::JobCompletion { job, server, epoch } => {
                // A freeze after scheduling makes this event stale; the
                // restarted segment carries its own completion.
                if self.cluster.epoch_of(job) == epoch {
                    self.cluster.complete(job)?;
                    self.record(LogEntry::Complete { time, job, server });
                }
            }
            EventKind::MigrationRestart { job, server } => {
                let placed = self.cluster.place(job, server)?;
                self.events.push(
                    placed.completion_at,
                    EventKind::JobCompletion {
                        job,
                        server,
                        epoch: placed.epoch,
                    },
                );
                self.record(LogEntry::Restart { time, job, server });
            }
            EventKind::PowerOnComplete { server } => {
                self.cluster.finish_power_on(server)?;
                self.record(LogEntry::BootComplete { time, server });
            }
            EventKind::MoverTick => self.mover_tick()?,
        }

        // Whatever happened may have unblocked the queue head or drained a
        // server; settle both before the clock moves on.
        let outcome = scheduler::try_dispatch(
            &mut self.cluster,
            self.config.placement,
            self.config.power_managed(),
            self.config.power_on_delay(),
        )?;
        for p in outcome.placements {
            self.events.push(
                p.completion_at,
                EventKind::JobCompletion {
                    job: p.job,
                    server: p.server,
                    epoch: p.epoch,
                },
            );
            self.record(LogEntry::Dispatch {
                time,
                job: p.job,
                server: p.server,
            });
        }
        for (server, ready_at) in outcome.boots {
            self.events.push(ready_at, EventKind::PowerOnComplete { server });
            self.record(LogEntry::BootRequested {
                time,
                server,
                ready_at,
            });
        }
        if self.config.power_managed() {
            for server in self.cluster.power_off_drained() {
                self.record(LogEntry::PowerOff { time, server });
            }
        }
        Ok(())
    }

    fn mover_tick(&mut self) -> Result<()> {
        let now = self.cluster.clock;
        let cooldown = self.config.cooldown();
        let plan = mover::plan(self.config.mover_algorithm, &self.cluster, now, cooldown);
        // The planner's own output is re-verified before a single freeze; a
        // bad plan is an internal bug, never a bad simulation result.
        if let Err(e) = mover::check_plan(&self.cluster, &plan, now, cooldown) {
            return Err(SimError::Internal(format!("mover produced an invalid plan: {e}")));
        }
        if !plan.is_empty() {
            log::debug!(
                "t={now}: consolidating {} moves, objective {:?} -> {:?}",
                plan.moves.len(),
                plan.objective_before,
                plan.objective_after
            );
            let restart_at = now + self.config.migration_downtime;
            for mv in &plan.moves {
                self.cluster.freeze(mv.job, mv.from, mv.to, restart_at)?;
                self.events.push(
                    restart_at,
                    EventKind::MigrationRestart {
                        job: mv.job,
                        server: mv.to,
                    },
                );
                self.record(LogEntry::Freeze {
                    time: now,
                    job: mv.job,
                    from: mv.from,
                    to: mv.to,
                    restart_at,
                });
            }
        }
        self.events.push(now + self.config.mover_interval, EventKind::MoverTick);
        Ok(())
    }
}

/// Runs the same trace with the mover off and on; everything else in the
/// config is shared. Returns (baseline, mover) reports. The two runs are
/// independent, so they execute in parallel.
pub fn run_pair(config: &SimConfig, trace: &[JobSpec]) -> Result<(SimReport, SimReport)> {
    let mut baseline_cfg = config.clone();
    baseline_cfg.mover_enabled = false;
    let mut mover_cfg = config.clone();
    mover_cfg.mover_enabled = true;
    let (baseline, mover) = rayon::join(
        || Simulation::run(baseline_cfg, trace),
        || Simulation::run(mover_cfg, trace),
    );
    Ok((baseline?, mover?))
}
