//! Farm state: servers, job records, the wait queue, and every legal state
//! transition. All mutation goes through the operations here so the
//! bookkeeping (per-server core counts, executed CPU time, migration
//! counters) can never drift from the job states; `validate` re-derives the
//! lot and is cheap enough to run at every sample boundary.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ServerId(pub u32);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "j{}", self.0)
    }
}

impl fmt::Display for ServerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// Immutable description of one job, as read from a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobSpec {
    pub id: JobId,
    pub submit_time: u64,
    pub cores: u32,
    /// Total CPU wall time the job needs, excluding migration downtime.
    pub runtime: u64,
    /// Higher runs first; ties broken by submit time, then id.
    pub priority: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobState {
    /// Present in the trace but not yet submitted.
    NotArrived,
    Queued,
    Running { server: ServerId, segment_start: u64 },
    /// Checkpointed for migration; cores are reserved on `dest` until the
    /// restart lands.
    Frozen { dest: ServerId, restart_at: u64 },
    Completed { at: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Migration {
    pub time: u64,
    pub from: ServerId,
    pub to: ServerId,
}

#[derive(Debug, Clone)]
pub struct JobRecord {
    pub spec: JobSpec,
    pub state: JobState,
    /// CPU seconds executed so far; updated whenever the job leaves a server,
    /// so it lags `clock` while the job is mid-segment.
    pub executed: u64,
    pub migrations: Vec<Migration>,
    pub last_migration_time: Option<u64>,
    pub first_dispatch_time: Option<u64>,
    /// Bumped on every placement and freeze. A pending completion event is
    /// only honoured if it carries the current epoch, which is how a freeze
    /// cancels the completion scheduled for the old placement.
    pub epoch: u64,
}

impl JobRecord {
    fn new(spec: JobSpec) -> Self {
        JobRecord {
            spec,
            state: JobState::NotArrived,
            executed: 0,
            migrations: Vec::new(),
            last_migration_time: None,
            first_dispatch_time: None,
            epoch: 0,
        }
    }

    pub fn is_completed(&self) -> bool {
        matches!(self.state, JobState::Completed { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerState {
    On,
    PoweringOn { ready_at: u64 },
    Off,
}

#[derive(Debug, Clone)]
pub struct Server {
    pub id: ServerId,
    pub capacity: u32,
    power: PowerState,
    occupants: BTreeMap<JobId, u32>,
    used: u32,
    /// Cores promised to inbound frozen jobs; excluded from `free_cores` so a
    /// dispatch burst cannot strand a migration mid-flight.
    reserved: u32,
    inbound: BTreeSet<JobId>,
}

impl Server {
    fn new(id: ServerId, capacity: u32) -> Self {
        Server {
            id,
            capacity,
            power: PowerState::On,
            occupants: BTreeMap::new(),
            used: 0,
            reserved: 0,
            inbound: BTreeSet::new(),
        }
    }

    pub fn power(&self) -> PowerState {
        self.power
    }

    pub fn is_on(&self) -> bool {
        self.power == PowerState::On
    }

    /// Cores a new placement may claim right now. Powered-off and booting
    /// servers offer none.
    pub fn free_cores(&self) -> u32 {
        match self.power {
            PowerState::On => self.capacity - self.used - self.reserved,
            _ => 0,
        }
    }

    /// Running plus inbound-reserved cores.
    pub fn load(&self) -> u32 {
        self.used + self.reserved
    }

    pub fn used_cores(&self) -> u32 {
        self.used
    }

    pub fn reserved_cores(&self) -> u32 {
        self.reserved
    }

    pub fn occupants(&self) -> impl Iterator<Item = (JobId, u32)> + '_ {
        self.occupants.iter().map(|(&id, &cores)| (id, cores))
    }

    pub fn occupant_count(&self) -> usize {
        self.occupants.len()
    }

    pub fn has_inbound(&self) -> bool {
        !self.inbound.is_empty()
    }

    /// No running jobs and no migration heading here.
    pub fn is_drained(&self) -> bool {
        self.occupants.is_empty() && self.inbound.is_empty()
    }
}

/// Queue position: highest priority first, then earliest submit, then id.
pub type QueueKey = (Reverse<i64>, u64, JobId);

pub fn queue_key(spec: &JobSpec) -> QueueKey {
    (Reverse(spec.priority), spec.submit_time, spec.id)
}

/// Result of placing a job on a server.
#[derive(Debug, Clone, Copy)]
pub struct Placed {
    /// When the job will finish if left undisturbed.
    pub completion_at: u64,
    /// Epoch the completion event must carry to stay valid.
    pub epoch: u64,
}

#[derive(Debug, Clone)]
pub struct ClusterState {
    pub clock: u64,
    servers: Vec<Server>,
    jobs: Vec<JobRecord>,
    index: HashMap<JobId, usize>,
    queue: BTreeSet<QueueKey>,
    used_total: u32,
    powered_on: u32,
    completed_jobs: u64,
    started_jobs: u64,
    moved_jobs: u64,
    migration_events: u64,
}

impl ClusterState {
    /// Builds the initial state: all servers powered on, every job
    /// `NotArrived`. The trace must already be validated (unique ids, cores
    /// within capacity).
    pub fn new(num_servers: u32, cores_per_server: u32, trace: &[JobSpec]) -> Self {
        let servers = (0..num_servers)
            .map(|i| Server::new(ServerId(i), cores_per_server))
            .collect();
        let jobs: Vec<JobRecord> = trace.iter().cloned().map(JobRecord::new).collect();
        let index = jobs
            .iter()
            .enumerate()
            .map(|(i, j)| (j.spec.id, i))
            .collect();
        ClusterState {
            clock: 0,
            servers,
            jobs,
            index,
            queue: BTreeSet::new(),
            used_total: 0,
            powered_on: num_servers,
            completed_jobs: 0,
            started_jobs: 0,
            moved_jobs: 0,
            migration_events: 0,
        }
    }

    pub fn servers(&self) -> &[Server] {
        &self.servers
    }

    pub fn server(&self, id: ServerId) -> &Server {
        &self.servers[id.0 as usize]
    }

    pub fn jobs(&self) -> &[JobRecord] {
        &self.jobs
    }

    pub fn job(&self, id: JobId) -> &JobRecord {
        &self.jobs[self.index[&id]]
    }

    fn job_mut(&mut self, id: JobId) -> &mut JobRecord {
        let idx = self.index[&id];
        &mut self.jobs[idx]
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn queue_head(&self) -> Option<JobId> {
        self.queue.iter().next().map(|k| k.2)
    }

    /// Queued job ids in dispatch order.
    pub fn queued_ids(&self) -> impl Iterator<Item = JobId> + '_ {
        self.queue.iter().map(|k| k.2)
    }

    pub fn used_cores_total(&self) -> u32 {
        self.used_total
    }

    /// Servers currently drawing power (on or booting).
    pub fn powered_on_servers(&self) -> u32 {
        self.powered_on
    }

    pub fn completed_jobs(&self) -> u64 {
        self.completed_jobs
    }

    /// Jobs that have been dispatched at least once.
    pub fn started_jobs(&self) -> u64 {
        self.started_jobs
    }

    /// Distinct jobs migrated at least once.
    pub fn moved_jobs(&self) -> u64 {
        self.moved_jobs
    }

    pub fn migration_events(&self) -> u64 {
        self.migration_events
    }

    pub fn epoch_of(&self, id: JobId) -> u64 {
        self.job(id).epoch
    }

    pub fn enqueue(&mut self, id: JobId) -> Result<()> {
        let job = self.job_mut(id);
        if job.state != JobState::NotArrived {
            return Err(SimError::Internal(format!(
                "duplicate arrival for {id} in state {:?}",
                job.state
            )));
        }
        job.state = JobState::Queued;
        let key = queue_key(&job.spec);
        self.queue.insert(key);
        Ok(())
    }

    /// Starts (or resumes) a job on `server` at the current clock. Legal from
    /// `Queued`, or from `Frozen` when this is the reserved destination and
    /// the restart is due. Returns the completion time for the new segment.
    pub fn place(&mut self, id: JobId, server: ServerId) -> Result<Placed> {
        let idx = self.index[&id];
        let (cores, remaining) = {
            let job = &self.jobs[idx];
            let cores = job.spec.cores;
            match job.state {
                JobState::Queued => {}
                JobState::Frozen { dest, restart_at } => {
                    if dest != server {
                        return Err(SimError::Internal(format!(
                            "{id} restarting on {server} but was frozen for {dest}"
                        )));
                    }
                    if restart_at != self.clock {
                        return Err(SimError::Internal(format!(
                            "{id} restart at t={} but was due at t={restart_at}",
                            self.clock
                        )));
                    }
                }
                other => {
                    return Err(SimError::Internal(format!(
                        "placing {id} in state {other:?}"
                    )))
                }
            }
            if job.executed >= job.spec.runtime {
                return Err(SimError::Internal(format!("placing finished job {id}")));
            }
            (cores, job.spec.runtime - job.executed)
        };

        // Release whichever structure held the job, then claim the cores.
        match self.jobs[idx].state {
            JobState::Queued => {
                let key = queue_key(&self.jobs[idx].spec);
                self.queue.remove(&key);
                if self.jobs[idx].first_dispatch_time.is_none() {
                    self.jobs[idx].first_dispatch_time = Some(self.clock);
                    self.started_jobs += 1;
                }
            }
            JobState::Frozen { .. } => {
                let srv = &mut self.servers[server.0 as usize];
                srv.reserved -= cores;
                srv.inbound.remove(&id);
            }
            _ => unreachable!(),
        }

        let srv = &mut self.servers[server.0 as usize];
        if !srv.is_on() {
            return Err(SimError::Internal(format!(
                "placing {id} on {server} which is {:?}",
                srv.power
            )));
        }
        if srv.free_cores() < cores {
            return Err(SimError::Internal(format!(
                "capacity violated placing {id} ({cores} cores) on {server} with {} free",
                srv.free_cores()
            )));
        }
        srv.occupants.insert(id, cores);
        srv.used += cores;
        self.used_total += cores;

        let job = &mut self.jobs[idx];
        job.state = JobState::Running {
            server,
            segment_start: self.clock,
        };
        job.epoch += 1;
        Ok(Placed {
            completion_at: self.clock + remaining,
            epoch: job.epoch,
        })
    }

    fn detach_running(&mut self, id: JobId) -> Result<(ServerId, u64)> {
        let idx = self.index[&id];
        let (server, segment_start) = match self.jobs[idx].state {
            JobState::Running {
                server,
                segment_start,
            } => (server, segment_start),
            other => {
                return Err(SimError::Internal(format!(
                    "detaching {id} in state {other:?}"
                )))
            }
        };
        let cores = self.jobs[idx].spec.cores;
        let srv = &mut self.servers[server.0 as usize];
        srv.occupants.remove(&id);
        srv.used -= cores;
        self.used_total -= cores;
        self.jobs[idx].executed += self.clock - segment_start;
        Ok((server, segment_start))
    }

    /// Finishes a running job at the current clock. The event logic
    /// guarantees the accrued CPU time lands exactly on the requirement.
    pub fn complete(&mut self, id: JobId) -> Result<()> {
        self.detach_running(id)?;
        let clock = self.clock;
        let job = self.job_mut(id);
        if job.executed != job.spec.runtime {
            return Err(SimError::Internal(format!(
                "{id} completed with {} of {} CPU seconds executed",
                job.executed, job.spec.runtime
            )));
        }
        job.state = JobState::Completed { at: clock };
        job.epoch += 1;
        self.completed_jobs += 1;
        Ok(())
    }

    /// Checkpoints a running job off `from` and reserves its cores on
    /// `dest`, where it will restart at `restart_at`.
    pub fn freeze(&mut self, id: JobId, from: ServerId, dest: ServerId, restart_at: u64) -> Result<()> {
        if from == dest {
            return Err(SimError::Internal(format!(
                "migrating {id} from {from} to itself"
            )));
        }
        {
            let job = self.job(id);
            let on = match job.state {
                JobState::Running { server, .. } => server,
                other => {
                    return Err(SimError::Internal(format!(
                        "freezing {id} in state {other:?}"
                    )))
                }
            };
            if on != from {
                return Err(SimError::Internal(format!(
                    "freezing {id} off {from} but it runs on {on}"
                )));
            }
        }
        let cores = self.job(id).spec.cores;
        {
            let target = &self.servers[dest.0 as usize];
            if !target.is_on() || target.free_cores() < cores {
                return Err(SimError::Internal(format!(
                    "migration target {dest} cannot take {id} ({cores} cores, {} free)",
                    target.free_cores()
                )));
            }
        }
        self.detach_running(id)?;
        if self.job(id).executed >= self.job(id).spec.runtime {
            return Err(SimError::Internal(format!("froze finished job {id}")));
        }
        let target = &mut self.servers[dest.0 as usize];
        target.reserved += cores;
        target.inbound.insert(id);

        let clock = self.clock;
        self.migration_events += 1;
        let job = self.job_mut(id);
        job.state = JobState::Frozen { dest, restart_at };
        job.migrations.push(Migration {
            time: clock,
            from,
            to: dest,
        });
        let first_move = job.last_migration_time.is_none();
        job.last_migration_time = Some(clock);
        job.epoch += 1;
        if first_move {
            self.moved_jobs += 1;
        }
        Ok(())
    }

    /// Starts booting an off server; true if a boot actually began. Already
    /// on or booting servers make this a no-op, which keeps power-on
    /// requests idempotent.
    pub fn begin_power_on(&mut self, id: ServerId, ready_at: u64) -> bool {
        let srv = &mut self.servers[id.0 as usize];
        match srv.power {
            PowerState::Off => {
                srv.power = PowerState::PoweringOn { ready_at };
                self.powered_on += 1;
                true
            }
            _ => false,
        }
    }

    pub fn finish_power_on(&mut self, id: ServerId) -> Result<()> {
        let srv = &mut self.servers[id.0 as usize];
        match srv.power {
            PowerState::PoweringOn { .. } => {
                srv.power = PowerState::On;
                Ok(())
            }
            other => Err(SimError::Internal(format!(
                "power-on completion for {id} in state {other:?}"
            ))),
        }
    }

    /// Powers off every on server with no occupants and no inbound
    /// migration. Returns the servers switched off, in id order.
    pub fn power_off_drained(&mut self) -> Vec<ServerId> {
        let mut off = Vec::new();
        for srv in &mut self.servers {
            if srv.power == PowerState::On && srv.is_drained() {
                srv.power = PowerState::Off;
                self.powered_on -= 1;
                off.push(srv.id);
            }
        }
        off
    }

    /// Re-derives every counter and cross-checks the state structures.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SimError::Internal(format!("validate: {msg}")));

        let mut used_total = 0u32;
        let mut powered_on = 0u32;
        for srv in &self.servers {
            let occ: u32 = srv.occupants.values().sum();
            if occ != srv.used {
                return fail(format!("{}: used {} but occupants sum {occ}", srv.id, srv.used));
            }
            let mut reserved = 0u32;
            for &id in &srv.inbound {
                match self.job(id).state {
                    JobState::Frozen { dest, .. } if dest == srv.id => {
                        reserved += self.job(id).spec.cores
                    }
                    other => {
                        return fail(format!(
                            "{}: inbound {id} is in state {other:?}",
                            srv.id
                        ))
                    }
                }
            }
            if reserved != srv.reserved {
                return fail(format!(
                    "{}: reserved {} but inbound sum {reserved}",
                    srv.id, srv.reserved
                ));
            }
            if srv.used + srv.reserved > srv.capacity {
                return fail(format!(
                    "{}: load {} exceeds capacity {}",
                    srv.id,
                    srv.load(),
                    srv.capacity
                ));
            }
            if srv.power != PowerState::Off {
                powered_on += 1;
            } else if !srv.is_drained() {
                return fail(format!("{}: powered off while occupied", srv.id));
            }
            used_total += srv.used;
        }
        if used_total != self.used_total {
            return fail(format!(
                "used total {} but servers sum {used_total}",
                self.used_total
            ));
        }
        if powered_on != self.powered_on {
            return fail(format!(
                "powered-on count {} but servers sum {powered_on}",
                self.powered_on
            ));
        }

        let mut queued = 0usize;
        for job in &self.jobs {
            let id = job.spec.id;
            if job.executed > job.spec.runtime {
                return fail(format!("{id} executed past its runtime"));
            }
            match job.state {
                JobState::NotArrived | JobState::Completed { .. } => {
                    if self.queue.contains(&queue_key(&job.spec)) {
                        return fail(format!("{id} queued in state {:?}", job.state));
                    }
                    if let JobState::Completed { .. } = job.state {
                        if job.executed != job.spec.runtime {
                            return fail(format!("{id} completed short of its runtime"));
                        }
                    }
                }
                JobState::Queued => {
                    queued += 1;
                    if !self.queue.contains(&queue_key(&job.spec)) {
                        return fail(format!("{id} marked queued but missing from queue"));
                    }
                }
                JobState::Running { server, .. } => {
                    let srv = self.server(server);
                    if srv.occupants.get(&id) != Some(&job.spec.cores) {
                        return fail(format!("{id} not an occupant of {server}"));
                    }
                    if !srv.is_on() {
                        return fail(format!("{id} running on powered-down {server}"));
                    }
                }
                JobState::Frozen { dest, .. } => {
                    if !self.server(dest).inbound.contains(&id) {
                        return fail(format!("{id} frozen but not inbound at {dest}"));
                    }
                }
            }
        }
        if queued != self.queue.len() {
            return fail(format!(
                "queue holds {} entries but {queued} jobs are queued",
                self.queue.len()
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(id: u64, submit: u64, cores: u32, runtime: u64, priority: i64) -> JobSpec {
        JobSpec {
            id: JobId(id),
            submit_time: submit,
            cores,
            runtime,
            priority,
        }
    }

    #[test]
    fn free_cores_subtracts_occupants() {
        let trace = [spec(0, 0, 1, 100, 0), spec(1, 0, 1, 100, 0), spec(2, 0, 2, 100, 0)];
        let mut c = ClusterState::new(1, 8, &trace);
        for j in 0..3 {
            c.enqueue(JobId(j)).unwrap();
            c.place(JobId(j), ServerId(0)).unwrap();
        }
        assert_eq!(c.server(ServerId(0)).free_cores(), 4);
        assert_eq!(c.used_cores_total(), 4);
        c.validate().unwrap();
    }

    #[test]
    fn queue_orders_by_priority_submit_id() {
        let trace = [
            spec(0, 50, 1, 10, 0),
            spec(1, 10, 1, 10, 0),
            spec(2, 10, 1, 10, 5),
            spec(3, 5, 1, 10, 0),
        ];
        let mut c = ClusterState::new(1, 1, &trace);
        for j in 0..4 {
            c.enqueue(JobId(j)).unwrap();
        }
        let order: Vec<JobId> = c.queued_ids().collect();
        assert_eq!(order, vec![JobId(2), JobId(3), JobId(1), JobId(0)]);
        assert_eq!(c.queue_head(), Some(JobId(2)));
    }

    #[test]
    fn placement_schedules_remaining_runtime() {
        let trace = [spec(0, 0, 1, 7200, 0)];
        let mut c = ClusterState::new(2, 2, &trace);
        c.enqueue(JobId(0)).unwrap();
        let placed = c.place(JobId(0), ServerId(0)).unwrap();
        assert_eq!(placed.completion_at, 7200);

        // Freeze halfway; the rebooted segment only needs what is left.
        c.clock = 3600;
        c.freeze(JobId(0), ServerId(0), ServerId(1), 10_000).unwrap();
        assert_eq!(c.job(JobId(0)).executed, 3600);
        assert_eq!(c.server(ServerId(1)).reserved_cores(), 1);
        assert_eq!(c.server(ServerId(1)).free_cores(), 1);

        c.clock = 10_000;
        let placed = c.place(JobId(0), ServerId(1)).unwrap();
        assert_eq!(placed.completion_at, 13_600);
        assert_eq!(c.server(ServerId(1)).reserved_cores(), 0);

        c.clock = 13_600;
        c.complete(JobId(0)).unwrap();
        assert_eq!(c.job(JobId(0)).executed, 7200);
        assert_eq!(c.completed_jobs(), 1);
        assert_eq!(c.moved_jobs(), 1);
        assert_eq!(c.migration_events(), 1);
        c.validate().unwrap();
    }

    #[test]
    fn epoch_bumps_on_every_attach_and_detach() {
        let trace = [spec(0, 0, 1, 100, 0)];
        let mut c = ClusterState::new(2, 1, &trace);
        c.enqueue(JobId(0)).unwrap();
        let placed = c.place(JobId(0), ServerId(0)).unwrap();
        assert_eq!(placed.epoch, 1);
        c.clock = 10;
        c.freeze(JobId(0), ServerId(0), ServerId(1), 70).unwrap();
        assert_eq!(c.epoch_of(JobId(0)), 2);
        c.clock = 70;
        let placed = c.place(JobId(0), ServerId(1)).unwrap();
        assert_eq!(placed.epoch, 3);
        assert_eq!(placed.completion_at, 160);
    }

    #[test]
    fn reservation_blocks_competing_placement() {
        let trace = [spec(0, 0, 2, 100, 0), spec(1, 0, 2, 100, 0)];
        let mut c = ClusterState::new(2, 2, &trace);
        c.enqueue(JobId(0)).unwrap();
        c.enqueue(JobId(1)).unwrap();
        c.place(JobId(0), ServerId(0)).unwrap();
        c.clock = 5;
        c.freeze(JobId(0), ServerId(0), ServerId(1), 65).unwrap();
        // Server 1 is physically empty but fully reserved.
        assert_eq!(c.server(ServerId(1)).used_cores(), 0);
        assert_eq!(c.server(ServerId(1)).free_cores(), 0);
        let err = c.place(JobId(1), ServerId(1)).unwrap_err();
        assert!(matches!(err, SimError::Internal(_)));
    }

    #[test]
    fn freeze_rejects_overfull_target() {
        let trace = [spec(0, 0, 2, 100, 0), spec(1, 0, 1, 100, 0)];
        let mut c = ClusterState::new(2, 2, &trace);
        c.enqueue(JobId(0)).unwrap();
        c.enqueue(JobId(1)).unwrap();
        c.place(JobId(0), ServerId(0)).unwrap();
        c.place(JobId(1), ServerId(1)).unwrap();
        c.clock = 10;
        let err = c.freeze(JobId(0), ServerId(0), ServerId(1), 70).unwrap_err();
        assert!(err.to_string().contains("migration target"));
        c.validate().unwrap();
    }

    #[test]
    fn power_cycle_and_drain() {
        let trace = [spec(0, 0, 1, 50, 0)];
        let mut c = ClusterState::new(2, 1, &trace);
        assert_eq!(c.powered_on_servers(), 2);
        c.enqueue(JobId(0)).unwrap();
        c.place(JobId(0), ServerId(0)).unwrap();

        let off = c.power_off_drained();
        assert_eq!(off, vec![ServerId(1)]);
        assert_eq!(c.powered_on_servers(), 1);
        assert_eq!(c.server(ServerId(1)).free_cores(), 0);

        assert!(c.begin_power_on(ServerId(1), 30));
        assert!(!c.begin_power_on(ServerId(1), 30), "boot request is idempotent");
        assert_eq!(c.powered_on_servers(), 2);
        assert_eq!(c.server(ServerId(1)).free_cores(), 0, "booting server not usable yet");
        c.clock = 30;
        c.finish_power_on(ServerId(1)).unwrap();
        assert_eq!(c.server(ServerId(1)).free_cores(), 1);

        c.clock = 50;
        c.complete(JobId(0)).unwrap();
        let off = c.power_off_drained();
        assert_eq!(off, vec![ServerId(0), ServerId(1)]);
        assert_eq!(c.powered_on_servers(), 0);
        c.validate().unwrap();
    }

    #[test]
    fn completion_requires_exact_runtime() {
        let trace = [spec(0, 0, 1, 100, 0)];
        let mut c = ClusterState::new(1, 1, &trace);
        c.enqueue(JobId(0)).unwrap();
        c.place(JobId(0), ServerId(0)).unwrap();
        c.clock = 99;
        let err = c.complete(JobId(0)).unwrap_err();
        assert!(err.to_string().contains("99 of 100"));
    }

    #[test]
    fn moved_jobs_counts_distinct_jobs() {
        let trace = [spec(0, 0, 1, 1000, 0)];
        let mut c = ClusterState::new(3, 1, &trace);
        c.enqueue(JobId(0)).unwrap();
        c.place(JobId(0), ServerId(0)).unwrap();
        c.clock = 10;
        c.freeze(JobId(0), ServerId(0), ServerId(1), 10).unwrap();
        c.place(JobId(0), ServerId(1)).unwrap();
        c.clock = 20;
        c.freeze(JobId(0), ServerId(1), ServerId(2), 20).unwrap();
        c.place(JobId(0), ServerId(2)).unwrap();
        assert_eq!(c.moved_jobs(), 1);
        assert_eq!(c.migration_events(), 2);
        assert_eq!(c.job(JobId(0)).migrations.len(), 2);
    }
}
