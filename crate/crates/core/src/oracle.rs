//! Test-support oracles, deliberately independent of the production code
//! paths they check: an exhaustive packing optimum for tiny instances, a
//! single-move improvement certificate, and a replay checker that re-derives
//! an entire logged run from first principles.

use std::collections::BTreeSet;
use std::collections::HashMap;

use crate::cluster::{JobId, JobSpec, ServerId};
use crate::config::{PlacementPolicy, SimConfig};
use crate::engine::{EventLog, LogEntry};
use crate::metrics::SimReport;
use crate::mover::Objective;

/// One server as the packing oracle sees it: total capacity plus the cores
/// that cannot move (ineligible jobs, reservations).
#[derive(Debug, Clone, Copy)]
pub struct OracleServer {
    pub capacity: u32,
    pub pinned: u32,
}

fn objective_of(caps: &[u32], loads: &[u32]) -> Objective {
    Objective {
        fully_free_servers: loads.iter().filter(|&&l| l == 0).count() as u32,
        largest_free_block: caps
            .iter()
            .zip(loads)
            .map(|(c, l)| c - l)
            .max()
            .unwrap_or(0),
    }
}

/// Best reachable objective when every movable job may land on any server
/// (one placement per job, capacity respected, pinned cores immovable).
/// Exhaustive search; `None` if the jobs cannot all be placed at once.
pub fn optimal_objective(servers: &[OracleServer], movable: &[u32]) -> Option<Objective> {
    assert!(
        servers.len() <= 5 && movable.len() <= 10,
        "the oracle enumerates every assignment; keep instances tiny"
    );
    let caps: Vec<u32> = servers.iter().map(|s| s.capacity).collect();
    let mut loads: Vec<u32> = servers.iter().map(|s| s.pinned).collect();
    if loads.iter().zip(&caps).any(|(l, c)| l > c) {
        return None;
    }
    // Big jobs first: infeasible branches die near the root.
    let mut jobs = movable.to_vec();
    jobs.sort_unstable_by(|a, b| b.cmp(a));

    fn dfs(i: usize, jobs: &[u32], caps: &[u32], loads: &mut [u32], best: &mut Option<Objective>) {
        if i == jobs.len() {
            let obj = objective_of(caps, loads);
            if best.map_or(true, |b| obj > b) {
                *best = Some(obj);
            }
            return;
        }
        for s in 0..caps.len() {
            if loads[s] + jobs[i] <= caps[s] {
                loads[s] += jobs[i];
                dfs(i + 1, jobs, caps, loads, best);
                loads[s] -= jobs[i];
            }
        }
    }

    let mut best = None;
    dfs(0, &jobs, &caps, &mut loads, &mut best);
    best
}

/// True when relocating exactly one movable job strictly improves the
/// objective. `placed[i] = (server index, cores)`; pinned cores live in
/// `servers[..].pinned`, movable cores do not.
pub fn single_move_improves(servers: &[OracleServer], placed: &[(usize, u32)]) -> bool {
    let caps: Vec<u32> = servers.iter().map(|s| s.capacity).collect();
    let mut loads: Vec<u32> = servers.iter().map(|s| s.pinned).collect();
    for &(s, cores) in placed {
        loads[s] += cores;
    }
    let before = objective_of(&caps, &loads);
    for &(s, cores) in placed {
        for t in 0..caps.len() {
            if t == s || loads[t] + cores > caps[t] {
                continue;
            }
            loads[s] -= cores;
            loads[t] += cores;
            let after = objective_of(&caps, &loads);
            loads[s] += cores;
            loads[t] -= cores;
            if after > before {
                return true;
            }
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Replay checking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum RState {
    Pending,
    Queued,
    Running { server: ServerId, since: u64 },
    Frozen { to: ServerId, restart_at: u64 },
    Done,
}

struct RJob {
    cores: u32,
    runtime: u64,
    submit: u64,
    priority: i64,
    state: RState,
    executed: u64,
    /// Total downtime spent frozen, for the completion-time identity.
    paused: u64,
    migrations: u64,
    first_dispatch: Option<u64>,
    last_migration: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RPower {
    On,
    Booting,
    Off,
}

struct RServer {
    capacity: u32,
    used: u32,
    reserved: u32,
    power: RPower,
    on_since: Option<u64>,
    on_integral: u64,
}

impl RServer {
    fn free(&self) -> u32 {
        match self.power {
            RPower::On => self.capacity - self.used - self.reserved,
            _ => 0,
        }
    }
}

struct Replayer {
    jobs: HashMap<JobId, RJob>,
    servers: Vec<RServer>,
    queue: BTreeSet<(std::cmp::Reverse<i64>, u64, JobId)>,
    placement: PlacementPolicy,
    managed: bool,
    boot_delay: u64,
    cooldown: u64,
    downtime: u64,
    horizon: u64,
    arrivals_seen: u64,
}

type Check = std::result::Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err(format!($($arg)+));
        }
    };
}

impl Replayer {
    fn new(config: &SimConfig, trace: &[JobSpec]) -> Self {
        let jobs = trace
            .iter()
            .map(|j| {
                (
                    j.id,
                    RJob {
                        cores: j.cores,
                        runtime: j.runtime,
                        submit: j.submit_time,
                        priority: j.priority,
                        state: RState::Pending,
                        executed: 0,
                        paused: 0,
                        migrations: 0,
                        first_dispatch: None,
                        last_migration: None,
                    },
                )
            })
            .collect();
        let managed = config.power_managed();
        let servers = (0..config.num_servers)
            .map(|_| RServer {
                capacity: config.cores_per_server,
                used: 0,
                reserved: 0,
                power: if managed { RPower::Off } else { RPower::On },
                on_since: if managed { None } else { Some(0) },
                on_integral: 0,
            })
            .collect();
        Replayer {
            jobs,
            servers,
            queue: BTreeSet::new(),
            placement: config.placement,
            managed,
            boot_delay: config.power_on_delay(),
            cooldown: config.cooldown(),
            downtime: config.migration_downtime,
            horizon: config.horizon,
            arrivals_seen: 0,
        }
    }

    fn job(&self, id: JobId) -> std::result::Result<&RJob, String> {
        self.jobs.get(&id).ok_or(format!("{id} not in trace"))
    }

    fn srv(&self, id: ServerId) -> std::result::Result<&RServer, String> {
        self.servers
            .get(id.0 as usize)
            .ok_or(format!("{id} out of range"))
    }

    /// The scheduler's choice, re-derived per the configured placement:
    /// most-loaded feasible powered-on server for pack, least-loaded for
    /// spread, ties to the lowest id either way.
    fn best_fit(&self, cores: u32) -> Option<ServerId> {
        let fits = self
            .servers
            .iter()
            .enumerate()
            .filter(|(_, s)| s.power == RPower::On && s.free() >= cores);
        match self.placement {
            PlacementPolicy::Pack => fits.min_by_key(|(i, s)| (s.free(), *i)),
            PlacementPolicy::Spread => {
                fits.min_by_key(|(i, s)| (std::cmp::Reverse(s.free()), *i))
            }
        }
        .map(|(i, _)| ServerId(i as u32))
    }

    fn head(&self) -> Option<JobId> {
        self.queue.iter().next().map(|&(_, _, id)| id)
    }

    fn apply(&mut self, entry: &LogEntry) -> Check {
        match *entry {
            LogEntry::Arrival { time, job } => {
                let j = self.job(job)?;
                ensure!(j.state == RState::Pending, "{job} arrived twice");
                ensure!(j.submit == time, "{job} arrived at {time}, submitted {}", j.submit);
                let key = (std::cmp::Reverse(j.priority), j.submit, job);
                self.jobs.get_mut(&job).unwrap().state = RState::Queued;
                self.queue.insert(key);
                self.arrivals_seen += 1;
            }
            LogEntry::Dispatch { time, job, server } => {
                ensure!(
                    self.head() == Some(job),
                    "{job} dispatched past the queue head {:?}",
                    self.head()
                );
                let j = self.job(job)?;
                ensure!(j.state == RState::Queued, "{job} dispatched while {:?}", j.state);
                let cores = j.cores;
                let pick = self.best_fit(cores);
                ensure!(
                    pick == Some(server),
                    "{job} sent to {server}, best fit is {pick:?}"
                );
                let key = (std::cmp::Reverse(j.priority), j.submit, job);
                self.queue.remove(&key);
                self.servers[server.0 as usize].used += cores;
                let j = self.jobs.get_mut(&job).unwrap();
                j.state = RState::Running { server, since: time };
                j.first_dispatch.get_or_insert(time);
            }
            LogEntry::Complete { time, job, server } => {
                let j = self.job(job)?;
                match j.state {
                    RState::Running { server: s, since } => {
                        ensure!(s == server, "{job} completed on {server}, ran on {s}");
                        ensure!(
                            j.executed + (time - since) == j.runtime,
                            "{job} completed with {} of {} seconds executed",
                            j.executed + (time - since),
                            j.runtime
                        );
                        ensure!(
                            time == j.first_dispatch.unwrap() + j.runtime + j.paused,
                            "{job} completion at {time} breaks dispatch+runtime+downtime"
                        );
                    }
                    other => return Err(format!("{job} completed while {other:?}")),
                }
                let cores = j.cores;
                self.servers[server.0 as usize].used -= cores;
                let j = self.jobs.get_mut(&job).unwrap();
                j.executed = j.runtime;
                j.state = RState::Done;
            }
            LogEntry::Freeze { time, job, from, to, restart_at } => {
                let j = self.job(job)?;
                let (server, since) = match j.state {
                    RState::Running { server, since } => (server, since),
                    other => return Err(format!("{job} frozen while {other:?}")),
                };
                ensure!(server == from, "{job} frozen on {from}, ran on {server}");
                ensure!(to != from, "{job} frozen onto its own server");
                ensure!(
                    restart_at == time + self.downtime,
                    "{job} restart_at {restart_at} is not freeze time + downtime"
                );
                if let Some(last) = j.last_migration {
                    ensure!(
                        time - last >= self.cooldown,
                        "{job} moved again {}s after its last move (cooldown {})",
                        time - last,
                        self.cooldown
                    );
                }
                let cores = j.cores;
                let dest = self.srv(to)?;
                ensure!(
                    dest.power == RPower::On && dest.free() >= cores,
                    "{to} cannot reserve {cores} cores for {job}"
                );
                self.servers[from.0 as usize].used -= cores;
                self.servers[to.0 as usize].reserved += cores;
                let j = self.jobs.get_mut(&job).unwrap();
                j.executed += time - since;
                ensure!(j.executed < j.runtime, "{job} frozen after its work was done");
                j.paused += restart_at - time;
                j.migrations += 1;
                j.last_migration = Some(time);
                j.state = RState::Frozen { to, restart_at };
            }
            LogEntry::Restart { time, job, server } => {
                let j = self.job(job)?;
                match j.state {
                    RState::Frozen { to, restart_at } => {
                        ensure!(to == server, "{job} restarted on {server}, frozen for {to}");
                        ensure!(restart_at == time, "{job} restarted at {time}, due {restart_at}");
                    }
                    other => return Err(format!("{job} restarted while {other:?}")),
                }
                let cores = j.cores;
                self.servers[server.0 as usize].reserved -= cores;
                self.servers[server.0 as usize].used += cores;
                self.jobs.get_mut(&job).unwrap().state = RState::Running { server, since: time };
            }
            LogEntry::BootRequested { time, server, ready_at } => {
                ensure!(self.managed, "boot requested without power management");
                ensure!(
                    ready_at == time + self.boot_delay,
                    "{server} ready_at {ready_at} is not request + delay"
                );
                let head = self.head().ok_or("boot requested with an empty queue")?;
                let cores = self.job(head)?.cores;
                ensure!(
                    self.best_fit(cores).is_none(),
                    "{server} booted while the head fits a powered-on server"
                );
                ensure!(
                    !self
                        .servers
                        .iter()
                        .any(|s| s.power == RPower::Booting && s.capacity >= cores),
                    "{server} booted while a suitable boot was already in flight"
                );
                let first_off = self
                    .servers
                    .iter()
                    .position(|s| s.power == RPower::Off)
                    .map(|i| ServerId(i as u32));
                ensure!(
                    first_off == Some(server),
                    "{server} booted, lowest-id off server is {first_off:?}"
                );
                let s = &mut self.servers[server.0 as usize];
                s.power = RPower::Booting;
                s.on_since = Some(time);
            }
            LogEntry::BootComplete { time: _, server } => {
                let s = self.srv(server)?;
                ensure!(s.power == RPower::Booting, "{server} boot-completed while {:?}", s.power);
                self.servers[server.0 as usize].power = RPower::On;
            }
            LogEntry::PowerOff { time, server } => {
                ensure!(self.managed, "power-off without power management");
                let s = self.srv(server)?;
                ensure!(s.power == RPower::On, "{server} powered off while {:?}", s.power);
                ensure!(
                    s.used == 0 && s.reserved == 0,
                    "{server} powered off while occupied ({} used, {} reserved)",
                    s.used,
                    s.reserved
                );
                let s = &mut self.servers[server.0 as usize];
                s.on_integral += time - s.on_since.take().unwrap();
                s.power = RPower::Off;
            }
        }
        Ok(())
    }

    /// Holds between distinct timestamps and at the end of the log: the
    /// engine never leaves a dispatch or a required boot request on the
    /// table.
    fn settled(&self) -> Check {
        let Some(head) = self.head() else { return Ok(()) };
        let cores = self.jobs[&head].cores;
        ensure!(
            self.best_fit(cores).is_none(),
            "queue head {head} fits a powered-on server but was not dispatched"
        );
        if self.managed
            && !self
                .servers
                .iter()
                .any(|s| s.power == RPower::Booting && s.capacity >= cores)
        {
            ensure!(
                !self.servers.iter().any(|s| s.power == RPower::Off),
                "queue head {head} is blocked but no boot was requested"
            );
        }
        Ok(())
    }
}

/// Re-derives a logged run from (config, trace) alone and checks every
/// entry's legality plus the report's totals, independently of the engine,
/// scheduler, and mover implementations.
pub fn replay_check(
    config: &SimConfig,
    trace: &[JobSpec],
    log: &EventLog,
    report: &SimReport,
) -> Check {
    let mut r = Replayer::new(config, trace);
    let mut now = 0u64;
    for entry in &log.entries {
        let time = match *entry {
            LogEntry::Arrival { time, .. }
            | LogEntry::Dispatch { time, .. }
            | LogEntry::Complete { time, .. }
            | LogEntry::Freeze { time, .. }
            | LogEntry::Restart { time, .. }
            | LogEntry::BootRequested { time, .. }
            | LogEntry::BootComplete { time, .. }
            | LogEntry::PowerOff { time, .. } => time,
        };
        ensure!(time >= now, "log goes back in time at {entry:?}");
        ensure!(time <= config.horizon, "entry beyond the horizon: {entry:?}");
        if time > now {
            r.settled()
                .map_err(|e| format!("unsettled state left at t={now}: {e}"))?;
            now = time;
        }
        r.apply(entry).map_err(|e| format!("at t={time}: {e}"))?;
    }
    r.settled().map_err(|e| format!("unsettled final state: {e}"))?;

    let expected_arrivals = trace.iter().filter(|j| j.submit_time <= config.horizon).count() as u64;
    ensure!(
        r.arrivals_seen == expected_arrivals,
        "saw {} arrivals, trace submits {expected_arrivals} inside the horizon",
        r.arrivals_seen
    );

    // Final accounting, re-derived.
    let mut ccs = 0u64;
    let mut completed = 0u64;
    let mut seen = 0u64;
    let mut moved = 0u64;
    let mut migration_events = 0u64;
    for job in r.jobs.values() {
        let mut executed = job.executed;
        if let RState::Running { since, .. } = job.state {
            executed += r.horizon - since;
        }
        ccs += executed * job.cores as u64;
        completed += (job.state == RState::Done) as u64;
        seen += job.first_dispatch.is_some() as u64;
        moved += (job.migrations > 0) as u64;
        migration_events += job.migrations;
    }
    let mut on_seconds = 0u64;
    for s in &r.servers {
        on_seconds += s.on_integral;
        if let Some(since) = s.on_since {
            on_seconds += r.horizon - since;
        }
    }

    let t = &report.totals;
    ensure!(t.completed_jobs == completed, "completed {} vs replayed {completed}", t.completed_jobs);
    ensure!(t.total_jobs_seen == seen, "seen {} vs replayed {seen}", t.total_jobs_seen);
    ensure!(t.moved_jobs == moved, "moved {} vs replayed {moved}", t.moved_jobs);
    ensure!(
        t.migration_events == migration_events,
        "migration events {} vs replayed {migration_events}",
        t.migration_events
    );
    ensure!(
        t.cumulative_core_seconds == ccs,
        "core-seconds {} vs replayed {ccs}",
        t.cumulative_core_seconds
    );
    ensure!(
        t.powered_on_server_seconds == on_seconds,
        "on-seconds {} vs replayed {on_seconds}",
        t.powered_on_server_seconds
    );

    // The sample series must be internally consistent too.
    let installed = config.installed_cores();
    let mut last_ccs = 0u64;
    for s in &report.samples {
        ensure!(s.used_cores <= installed, "sample at {} overfills the farm", s.time_s);
        ensure!(
            s.cumulative_core_seconds >= last_ccs,
            "cumulative core-seconds regress at {}",
            s.time_s
        );
        last_ccs = s.cumulative_core_seconds;
    }
    ensure!(last_ccs <= ccs, "sampled core-seconds exceed the final total");
    Ok(())
}
