//! Golden check for the mover-less baseline: a from-scratch FIFO farm
//! simulator, written against the scheduling rules rather than the engine's
//! structure, must agree with `Simulation` event for event on the same
//! traces — dispatch instants, chosen servers, completions, and the exact
//! core-second integral.

use std::collections::HashMap;

use jobmover_sim::cluster::{JobId, JobSpec};
use jobmover_sim::config::{PlacementPolicy, SimConfig};
use jobmover_sim::engine::{LogEntry, Simulation};
use jobmover_sim::workload::{generate, ArrivalProcess, RandomWorkload, WorkloadSpec, WorstCaseWorkload};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Outcome {
    dispatch: u64,
    server: u32,
    completion: Option<u64>,
}

/// Runs the trace on an always-on farm with no mover, one event at a time:
/// completions settle dispatches before same-second arrivals, matching the
/// engine's event ranks, and the queue is strictly head-of-line.
fn reference_run(
    num_servers: u32,
    cores_per_server: u32,
    horizon: u64,
    placement: PlacementPolicy,
    trace: &[JobSpec],
) -> (HashMap<u64, Outcome>, u64, u64) {
    let mut free = vec![cores_per_server; num_servers as usize];
    let mut queue: Vec<usize> = Vec::new();
    // (end time, dispatch sequence, trace index): earlier-dispatched jobs
    // complete first within one second, like the engine's event queue.
    let mut running: Vec<(u64, u64, usize)> = Vec::new();
    let mut outcomes: HashMap<u64, Outcome> = HashMap::new();
    let mut next_arrival = 0usize;
    let mut dispatch_seq = 0u64;
    let mut used = 0u32;
    let mut last_t = 0u64;
    let mut ccs = 0u64;
    let mut completed = 0u64;

    fn dispatch_head(
        queue: &mut Vec<usize>,
        trace: &[JobSpec],
        free: &mut [u32],
        running: &mut Vec<(u64, u64, usize)>,
        outcomes: &mut HashMap<u64, Outcome>,
        placement: PlacementPolicy,
        now: u64,
        dispatch_seq: &mut u64,
        used: &mut u32,
    ) {
        loop {
            queue.sort_by_key(|&i| (-trace[i].priority, trace[i].submit_time, trace[i].id.0));
            let Some(&head) = queue.first() else { break };
            let cores = trace[head].cores;
            let mut choice: Option<usize> = None;
            for (s, &f) in free.iter().enumerate() {
                if f < cores {
                    continue;
                }
                let better = match (placement, choice) {
                    (_, None) => true,
                    (PlacementPolicy::Pack, Some(c)) => f < free[c],
                    (PlacementPolicy::Spread, Some(c)) => f > free[c],
                };
                if better {
                    choice = Some(s);
                }
            }
            let Some(s) = choice else { break };
            free[s] -= cores;
            *used += cores;
            running.push((now + trace[head].runtime, *dispatch_seq, head));
            *dispatch_seq += 1;
            outcomes.insert(
                trace[head].id.0,
                Outcome {
                    dispatch: now,
                    server: s as u32,
                    completion: None,
                },
            );
            queue.remove(0);
        }
    }

    loop {
        let next_completion = running.iter().min_by_key(|&&(t, s, _)| (t, s)).copied();
        let arrival_time = trace.get(next_arrival).map(|j| j.submit_time);
        let (t, is_completion) = match (next_completion, arrival_time) {
            (None, None) => break,
            (Some((tc, _, _)), None) => (tc, true),
            (None, Some(ta)) => (ta, false),
            (Some((tc, _, _)), Some(ta)) => {
                if tc <= ta {
                    (tc, true)
                } else {
                    (ta, false)
                }
            }
        };
        if t > horizon {
            break;
        }
        ccs += used as u64 * (t - last_t);
        last_t = t;

        if is_completion {
            let (end, seq, idx) = next_completion.unwrap();
            running.retain(|&(_, s, _)| s != seq);
            free[outcomes[&trace[idx].id.0].server as usize] += trace[idx].cores;
            used -= trace[idx].cores;
            outcomes.get_mut(&trace[idx].id.0).unwrap().completion = Some(end);
            completed += 1;
        } else {
            queue.push(next_arrival);
            next_arrival += 1;
        }
        dispatch_head(
            &mut queue,
            trace,
            &mut free,
            &mut running,
            &mut outcomes,
            placement,
            t,
            &mut dispatch_seq,
            &mut used,
        );
    }
    ccs += used as u64 * (horizon - last_t);
    (outcomes, ccs, completed)
}

fn check_against_reference(config: &SimConfig, trace: &[JobSpec]) {
    let mut cfg = config.clone();
    cfg.mover_enabled = false;
    let (report, log) = Simulation::run_logged(cfg.clone(), trace).unwrap();
    let (expected, ccs, completed) = reference_run(
        cfg.num_servers,
        cfg.cores_per_server,
        cfg.horizon,
        cfg.placement,
        trace,
    );

    assert_eq!(report.totals.moved_jobs, 0);
    assert_eq!(report.totals.migration_events, 0);
    assert_eq!(report.totals.cumulative_core_seconds, ccs, "core-second integral");
    assert_eq!(report.totals.completed_jobs, completed);
    assert_eq!(report.totals.total_jobs_seen, expected.len() as u64);

    let mut seen: HashMap<u64, Outcome> = HashMap::new();
    for entry in &log.entries {
        match *entry {
            LogEntry::Dispatch { time, job, server } => {
                let prev = seen.insert(
                    job.0,
                    Outcome {
                        dispatch: time,
                        server: server.0,
                        completion: None,
                    },
                );
                assert!(prev.is_none(), "{job} dispatched twice with the mover off");
            }
            LogEntry::Complete { time, job, .. } => {
                seen.get_mut(&job.0).expect("completion before dispatch").completion =
                    Some(time);
            }
            LogEntry::Freeze { job, .. } | LogEntry::Restart { job, .. } => {
                panic!("{job} migrated with the mover off");
            }
            _ => {}
        }
    }
    assert_eq!(seen, expected, "per-job dispatch/server/completion schedule");
}

fn random_config(num_servers: u32, cores: u32, horizon: u64) -> SimConfig {
    let mut cfg = SimConfig::new(num_servers, cores);
    cfg.horizon = horizon;
    cfg
}

#[test]
fn matches_on_saturated_random_traces() {
    for placement in [PlacementPolicy::Pack, PlacementPolicy::Spread] {
        for seed in [1u64, 2, 3] {
            let mut cfg = random_config(8, 4, 10 * 86_400);
            cfg.placement = placement;
            cfg.rng_seed = seed;
            let trace = generate(&cfg.workload, 8, 4, cfg.horizon, seed).unwrap();
            check_against_reference(&cfg, &trace);
        }
    }
}

#[test]
fn matches_on_open_loop_arrivals() {
    let mut cfg = random_config(5, 8, 7 * 86_400);
    cfg.placement = PlacementPolicy::Spread;
    cfg.workload = WorkloadSpec::Random(RandomWorkload {
        arrival: ArrivalProcess::Interval {
            mean_seconds: 1_800.0,
        },
        ..RandomWorkload::default()
    });
    let trace = generate(&cfg.workload, 5, 8, cfg.horizon, 11).unwrap();
    check_against_reference(&cfg, &trace);
}

#[test]
fn matches_on_the_adversarial_pattern() {
    let mut cfg = random_config(6, 4, 20 * 86_400);
    cfg.placement = PlacementPolicy::Spread;
    cfg.workload = WorkloadSpec::WorstCase(WorstCaseWorkload::default());
    let trace = generate(&cfg.workload, 6, 4, cfg.horizon, 0).unwrap();
    check_against_reference(&cfg, &trace);
}

#[test]
fn matches_with_priorities_and_ties() {
    // Bursts sharing a submit second, priorities pulling later jobs ahead,
    // and ids deciding the rest.
    let mut trace = Vec::new();
    for i in 0..240u64 {
        trace.push(JobSpec {
            id: JobId(i),
            submit_time: (i / 4) * 900,
            cores: 1 + (i % 3) as u32,
            runtime: 2_000 + (i % 5) * 700,
            priority: [0, 2, -1][(i % 3) as usize],
        });
    }
    for placement in [PlacementPolicy::Pack, PlacementPolicy::Spread] {
        let mut cfg = random_config(3, 4, 100_000);
        cfg.placement = placement;
        check_against_reference(&cfg, &trace);
    }
}
