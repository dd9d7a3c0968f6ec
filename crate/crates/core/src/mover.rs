//! The job mover: periodic consolidation of running jobs via
//! checkpoint/restart migrations.
//!
//! Both planners work on a snapshot of the powered-on servers in which every
//! running job is either *movable* (its per-job cooldown has expired) or
//! *pinned* (cooldown still active, or it is a frozen inbound migration whose
//! reservation must be honoured). A plan is returned only when the packing
//! objective strictly improves, so a tick either helps or does nothing.
//!
//! The objective is lexicographic: first the number of fully free servers
//! (they can be powered off or host the widest jobs), then the largest free
//! core block on any single server (the widest job that could dispatch).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use crate::cluster::{ClusterState, JobId, JobState, PowerState, ServerId};
use crate::config::MoverAlgorithm;

/// Packing quality; bigger is better, compared lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Objective {
    pub fully_free_servers: u32,
    pub largest_free_block: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub job: JobId,
    pub from: ServerId,
    pub to: ServerId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MigrationPlan {
    /// Migrations in application order; each step is capacity-safe given the
    /// ones before it.
    pub moves: Vec<Move>,
    pub objective_before: Objective,
    pub objective_after: Objective,
}

impl MigrationPlan {
    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    fn unchanged(objective: Objective) -> Self {
        MigrationPlan {
            moves: Vec::new(),
            objective_before: objective,
            objective_after: objective,
        }
    }
}

/// Current packing objective over the powered-on servers. Reserved inbound
/// cores count as load: a server expecting a migration is not free.
pub fn objective(cluster: &ClusterState) -> Objective {
    let mut fully_free = 0;
    let mut largest = 0;
    for srv in cluster.servers() {
        if srv.power() != PowerState::On {
            continue;
        }
        let load = srv.load();
        if load == 0 {
            fully_free += 1;
        }
        largest = largest.max(srv.capacity - load);
    }
    Objective {
        fully_free_servers: fully_free,
        largest_free_block: largest,
    }
}

pub fn plan(
    algorithm: MoverAlgorithm,
    cluster: &ClusterState,
    now: u64,
    cooldown: u64,
) -> MigrationPlan {
    match algorithm {
        MoverAlgorithm::DrainGreedy => plan_drain_greedy(cluster, now, cooldown),
        MoverAlgorithm::FfdRepack => plan_ffd_repack(cluster, now, cooldown),
    }
}

/// Planner's view of one powered-on server.
#[derive(Debug, Clone)]
struct Snap {
    id: ServerId,
    capacity: u32,
    /// Cores that cannot move: cooldown-pinned occupants plus inbound
    /// reservations.
    fixed: u32,
    /// Movable occupants, ascending job id.
    movable: Vec<(JobId, u32)>,
    movable_cores: u32,
}

impl Snap {
    fn load(&self) -> u32 {
        self.fixed + self.movable_cores
    }

    fn free(&self) -> u32 {
        self.capacity - self.load()
    }
}

fn eligible(job: &crate::cluster::JobRecord, now: u64, cooldown: u64) -> bool {
    match job.last_migration_time {
        None => true,
        Some(t) => now.saturating_sub(t) >= cooldown,
    }
}

fn snapshot(cluster: &ClusterState, now: u64, cooldown: u64) -> Vec<Snap> {
    let mut snaps: Vec<Snap> = cluster
        .servers()
        .iter()
        .filter(|s| s.power() == PowerState::On)
        .map(|s| Snap {
            id: s.id,
            capacity: s.capacity,
            fixed: s.reserved_cores(),
            movable: Vec::new(),
            movable_cores: 0,
        })
        .collect();
    let by_id: BTreeMap<ServerId, usize> = snaps
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id, i))
        .collect();
    for srv in cluster.servers() {
        if !srv.is_on() {
            continue;
        }
        let snap = &mut snaps[by_id[&srv.id]];
        for (job_id, cores) in srv.occupants() {
            if eligible(cluster.job(job_id), now, cooldown) {
                snap.movable.push((job_id, cores));
                snap.movable_cores += cores;
            } else {
                snap.fixed += cores;
            }
        }
    }
    snaps
}

fn objective_of(snaps: &[Snap]) -> Objective {
    let mut fully_free = 0;
    let mut largest = 0;
    for s in snaps {
        if s.load() == 0 {
            fully_free += 1;
        }
        largest = largest.max(s.free());
    }
    Objective {
        fully_free_servers: fully_free,
        largest_free_block: largest,
    }
}

/// Greedy consolidation: repeatedly pick the least-loaded server whose
/// occupants can *all* be relocated (ties to the highest id, so work flows
/// towards low ids) and drain it, sending each job, widest first, to the
/// most-loaded feasible receiver carrying strictly more load than the
/// donor's remainder. Each successful drain frees one server outright.
///
/// When no server can be fully drained, falls back to the single migration
/// that best improves the objective on its own, if one exists; fragmentation
/// still shrinks on ticks where a full drain is out of reach.
pub fn plan_drain_greedy(cluster: &ClusterState, now: u64, cooldown: u64) -> MigrationPlan {
    let mut snaps = snapshot(cluster, now, cooldown);
    let before = objective_of(&snaps);
    let mut moves: Vec<Move> = Vec::new();

    loop {
        let mut donors: Vec<usize> = (0..snaps.len())
            .filter(|&i| snaps[i].fixed == 0 && !snaps[i].movable.is_empty())
            .collect();
        donors.sort_by_key(|&i| (snaps[i].load(), Reverse(snaps[i].id)));

        let mut progressed = false;
        for &d in &donors {
            let mut items = snaps[d].movable.clone();
            items.sort_by_key(|&(id, cores)| (Reverse(cores), id));

            let mut extra = vec![0u32; snaps.len()];
            let mut picked: Vec<(usize, JobId, u32)> = Vec::new();
            let mut donor_left = snaps[d].load();
            let mut ok = true;
            for &(job, cores) in &items {
                donor_left -= cores;
                let mut best: Option<(u32, usize)> = None;
                for r in 0..snaps.len() {
                    if r == d {
                        continue;
                    }
                    let load = snaps[r].load() + extra[r];
                    let free = snaps[r].capacity - load;
                    if free >= cores
                        && load > donor_left
                        && best.map_or(true, |(best_load, _)| load > best_load)
                    {
                        best = Some((load, r));
                    }
                }
                match best {
                    Some((_, r)) => {
                        extra[r] += cores;
                        picked.push((r, job, cores));
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && !picked.is_empty() {
                for &(r, job, cores) in &picked {
                    // Received jobs are mid-migration; they stay put for the
                    // rest of this plan.
                    snaps[r].fixed += cores;
                    moves.push(Move {
                        job,
                        from: snaps[d].id,
                        to: snaps[r].id,
                    });
                }
                snaps[d].movable.clear();
                snaps[d].movable_cores = 0;
                progressed = true;
                break;
            }
        }
        if !progressed {
            break;
        }
    }

    if moves.is_empty() {
        if let Some((mv, cores, s, t)) = best_single_move(&snaps, before) {
            snaps[s].movable.retain(|&(j, _)| j != mv.job);
            snaps[s].movable_cores -= cores;
            snaps[t].fixed += cores;
            moves.push(mv);
        }
    }

    let after = objective_of(&snaps);
    if !moves.is_empty() && after > before {
        MigrationPlan {
            moves,
            objective_before: before,
            objective_after: after,
        }
    } else {
        MigrationPlan::unchanged(before)
    }
}

/// Best single objective-improving migration over a pristine snapshot, or
/// `None`. Ties keep the earliest candidate in (source id, job id, target
/// id) scan order.
fn best_single_move(
    snaps: &[Snap],
    before: Objective,
) -> Option<(Move, u32, usize, usize)> {
    // Top three free blocks let us compute the post-move maximum free block
    // with any two servers excluded in O(1).
    let mut top: Vec<(u32, usize)> = snaps.iter().enumerate().map(|(i, s)| (s.free(), i)).collect();
    top.sort_by_key(|&(free, i)| (Reverse(free), i));
    top.truncate(3);
    let max_free_excluding = |a: usize, b: usize| -> u32 {
        top.iter()
            .find(|&&(_, i)| i != a && i != b)
            .map_or(0, |&(free, _)| free)
    };

    let mut best: Option<(Objective, Move, u32, usize, usize)> = None;
    for s in 0..snaps.len() {
        let s_load = snaps[s].load();
        for &(job, cores) in &snaps[s].movable {
            for t in 0..snaps.len() {
                if t == s {
                    continue;
                }
                let t_load = snaps[t].load();
                let t_free = snaps[t].capacity - t_load;
                if t_free < cores {
                    continue;
                }
                let fully_free = before.fully_free_servers + u32::from(s_load == cores)
                    - u32::from(t_load == 0);
                let largest = (snaps[s].free() + cores)
                    .max(t_free - cores)
                    .max(max_free_excluding(s, t));
                let after = Objective {
                    fully_free_servers: fully_free,
                    largest_free_block: largest,
                };
                if after > before && best.as_ref().map_or(true, |(b, ..)| after > *b) {
                    best = Some((
                        after,
                        Move {
                            job,
                            from: snaps[s].id,
                            to: snaps[t].id,
                        },
                        cores,
                        s,
                        t,
                    ));
                }
            }
        }
    }
    best.map(|(_, mv, cores, s, t)| (mv, cores, s, t))
}

/// Global repack: first-fit-decreasing of every movable job onto the servers
/// ordered by descending pre-plan load, pinned jobs and reservations held in
/// place. More aggressive than draining — it may rebuild the whole layout —
/// at the cost of more migrations. Moves that cannot be sequenced without
/// overfilling a server (cyclic swaps) are dropped.
pub fn plan_ffd_repack(cluster: &ClusterState, now: u64, cooldown: u64) -> MigrationPlan {
    let snaps = snapshot(cluster, now, cooldown);
    let before = objective_of(&snaps);

    let mut bin_order: Vec<usize> = (0..snaps.len()).collect();
    bin_order.sort_by_key(|&i| (Reverse(snaps[i].load()), snaps[i].id));

    let mut jobs: Vec<(JobId, u32, usize)> = Vec::new();
    for (i, s) in snaps.iter().enumerate() {
        for &(job, cores) in &s.movable {
            jobs.push((job, cores, i));
        }
    }
    jobs.sort_by_key(|&(job, cores, _)| (Reverse(cores), job));

    let mut target_free: Vec<u32> = snaps.iter().map(|s| s.capacity - s.fixed).collect();
    let mut pending: Vec<(JobId, u32, usize, usize)> = Vec::new();
    for &(job, cores, from) in &jobs {
        match bin_order
            .iter()
            .copied()
            .find(|&i| target_free[i] >= cores)
        {
            Some(to) => {
                target_free[to] -= cores;
                if to != from {
                    pending.push((job, cores, from, to));
                }
            }
            // First-fit occasionally fails to reproduce a feasible packing;
            // skip this tick rather than emit a partial layout.
            None => return MigrationPlan::unchanged(before),
        }
    }

    let mut live_load: Vec<u32> = snaps.iter().map(|s| s.load()).collect();
    let mut moves: Vec<Move> = Vec::new();
    loop {
        let mut emitted = false;
        pending.retain(|&(job, cores, from, to)| {
            if snaps[to].capacity - live_load[to] >= cores {
                live_load[from] -= cores;
                live_load[to] += cores;
                moves.push(Move {
                    job,
                    from: snaps[from].id,
                    to: snaps[to].id,
                });
                emitted = true;
                false
            } else {
                true
            }
        });
        if !emitted || pending.is_empty() {
            break;
        }
    }

    let mut fully_free = 0;
    let mut largest = 0;
    for (i, s) in snaps.iter().enumerate() {
        if live_load[i] == 0 {
            fully_free += 1;
        }
        largest = largest.max(s.capacity - live_load[i]);
    }
    let after = Objective {
        fully_free_servers: fully_free,
        largest_free_block: largest,
    };
    if !moves.is_empty() && after > before {
        MigrationPlan {
            moves,
            objective_before: before,
            objective_after: after,
        }
    } else {
        MigrationPlan::unchanged(before)
    }
}

/// Independently verifies a plan against the cluster it was built for:
/// every move must take a distinct, cooldown-eligible running job from its
/// actual server to a different powered-on server without ever exceeding
/// capacity, and the claimed objectives must match. Returns the verified
/// post-plan objective.
pub fn check_plan(
    cluster: &ClusterState,
    plan: &MigrationPlan,
    now: u64,
    cooldown: u64,
) -> std::result::Result<Objective, String> {
    let current = objective(cluster);
    if plan.objective_before != current {
        return Err(format!(
            "plan claims starting objective {:?} but cluster is at {current:?}",
            plan.objective_before
        ));
    }

    let mut load: BTreeMap<ServerId, u32> = cluster
        .servers()
        .iter()
        .filter(|s| s.power() == PowerState::On)
        .map(|s| (s.id, s.load()))
        .collect();
    let mut moved: BTreeSet<JobId> = BTreeSet::new();

    for mv in &plan.moves {
        let job = cluster.job(mv.job);
        if !moved.insert(mv.job) {
            return Err(format!("{} moved twice", mv.job));
        }
        match job.state {
            JobState::Running { server, .. } if server == mv.from => {}
            other => {
                return Err(format!(
                    "{} expected running on {} but is {other:?}",
                    mv.job, mv.from
                ))
            }
        }
        if !eligible(job, now, cooldown) {
            return Err(format!("{} is still cooling down", mv.job));
        }
        let cores = job.spec.cores;
        let from = load
            .get_mut(&mv.from)
            .ok_or_else(|| format!("source {} not powered on", mv.from))?;
        *from -= cores;
        let capacity = cluster.server(mv.to).capacity;
        let to = load
            .get_mut(&mv.to)
            .ok_or_else(|| format!("target {} not powered on", mv.to))?;
        if mv.to == mv.from {
            return Err(format!("{} moved to its own server", mv.job));
        }
        *to += cores;
        if *to > capacity {
            return Err(format!(
                "applying {:?} overfills {} ({} of {capacity})",
                mv, mv.to, *to
            ));
        }
    }

    let mut fully_free = 0;
    let mut largest = 0;
    for (&id, &l) in &load {
        if l == 0 {
            fully_free += 1;
        }
        largest = largest.max(cluster.server(id).capacity - l);
    }
    let after = Objective {
        fully_free_servers: fully_free,
        largest_free_block: largest,
    };
    if after != plan.objective_after {
        return Err(format!(
            "plan claims final objective {:?} but application yields {after:?}",
            plan.objective_after
        ));
    }
    if !plan.moves.is_empty() && after <= plan.objective_before {
        return Err(format!(
            "non-empty plan does not improve the objective ({:?} -> {after:?})",
            plan.objective_before
        ));
    }
    Ok(after)
}
