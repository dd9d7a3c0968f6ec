//! Workload generation and the on-disk trace format.
//!
//! A trace is a text file with one job per line, sorted by submit time:
//!
//! ```text
//! # submit_time_s cores runtime_s priority
//! 0 2 86400 0
//! 3600 1 7200 0
//! ```
//!
//! Job ids are the line positions, so a saved trace re-runs identically.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::{JobId, JobSpec};
use crate::config::DEFAULT_HORIZON;
use crate::error::{Result, SimError};

/// One hour.
pub const DEFAULT_RUNTIME_MIN: u64 = 3_600;
/// Fifteen days.
pub const DEFAULT_RUNTIME_MAX: u64 = 1_296_000;

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadSpec {
    Random(RandomWorkload),
    WorstCase(WorstCaseWorkload),
    TraceFile { path: PathBuf },
}

/// Jobs with uniformly random core demand and runtime.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWorkload {
    pub cores_min: u32,
    /// `None` tracks the farm's cores-per-server.
    pub cores_max: Option<u32>,
    pub runtime_min: u64,
    pub runtime_max: u64,
    pub arrival: ArrivalProcess,
}

impl Default for RandomWorkload {
    fn default() -> Self {
        RandomWorkload {
            cores_min: 1,
            cores_max: None,
            runtime_min: DEFAULT_RUNTIME_MIN,
            runtime_max: DEFAULT_RUNTIME_MAX,
            arrival: ArrivalProcess::Saturated { backlog: None },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalProcess {
    /// Closed loop: submissions replenish the queue so roughly `backlog`
    /// jobs always wait ahead of an ideally-packed farm. Keeps the farm
    /// busy for the whole run without flooding it with unrunnable work.
    /// `None` tracks 4x the server count.
    Saturated { backlog: Option<u32> },
    /// Open loop: exponential inter-arrival times with the given mean.
    Interval { mean_seconds: f64 },
}

/// Adversarial pattern that maximises head-of-line blocking: each cycle
/// submits long single-core jobs followed one second later by full-width
/// short jobs, so without consolidation the full-width jobs wedge behind
/// slivers of fragmented capacity.
///
/// The defaults are tuned so the wedge actually forms under spread
/// placement: the full-width runtime is one second shy of the cycle, so
/// each cycle's full-width job vacates its server exactly as the next
/// mono dispatches and the mono inherits it. One server at a time picks
/// up a sliver that outlives the horizon, until every server carries one
/// and the full-width stream blocks for good.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseWorkload {
    pub long_runtime: u64,
    pub short_runtime: u64,
    pub monos_per_cycle: u32,
    pub fullcores_per_cycle: u32,
    pub cycle_period: u64,
}

impl Default for WorstCaseWorkload {
    fn default() -> Self {
        WorstCaseWorkload {
            long_runtime: DEFAULT_HORIZON,
            short_runtime: 3_599,
            monos_per_cycle: 1,
            fullcores_per_cycle: 1,
            cycle_period: 3_600,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self, cores_per_server: u32) -> Result<()> {
        let err = |msg: String| Err(SimError::Config(msg));
        match self {
            WorkloadSpec::Random(w) => {
                if w.cores_min == 0 {
                    return err("cores_min must be at least 1".into());
                }
                let cores_max = w.cores_max.unwrap_or(cores_per_server);
                if cores_max < w.cores_min || cores_max > cores_per_server {
                    return err(format!(
                        "cores_max must lie in [{}, {cores_per_server}]",
                        w.cores_min
                    ));
                }
                if w.runtime_min == 0 || w.runtime_min > w.runtime_max {
                    return err("need 0 < runtime_min <= runtime_max".into());
                }
                if let ArrivalProcess::Interval { mean_seconds } = w.arrival {
                    if !mean_seconds.is_finite() || mean_seconds <= 0.0 {
                        return err("mean_interarrival must be positive".into());
                    }
                }
            }
            WorkloadSpec::WorstCase(w) => {
                if w.long_runtime == 0 || w.short_runtime == 0 {
                    return err("worstcase runtimes must be positive".into());
                }
                if w.cycle_period == 0 {
                    return err("cycle_period must be positive".into());
                }
            }
            WorkloadSpec::TraceFile { .. } => {}
        }
        Ok(())
    }
}

/// Produces the job trace for a run. Pure function of its arguments: the
/// same spec, farm shape, horizon and seed always yield the same jobs.
pub fn generate(
    spec: &WorkloadSpec,
    num_servers: u32,
    cores_per_server: u32,
    horizon: u64,
    seed: u64,
) -> Result<Vec<JobSpec>> {
    match spec {
        WorkloadSpec::Random(w) => Ok(gen_random(w, num_servers, cores_per_server, horizon, seed)),
        WorkloadSpec::WorstCase(w) => Ok(gen_worstcase(w, cores_per_server, horizon)),
        WorkloadSpec::TraceFile { path } => load_trace(path),
    }
}

fn gen_random(
    w: &RandomWorkload,
    num_servers: u32,
    cores_per_server: u32,
    horizon: u64,
    seed: u64,
) -> Vec<JobSpec> {
    let cores_max = w.cores_max.unwrap_or(cores_per_server);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs: Vec<JobSpec> = Vec::new();
    let draw = |rng: &mut ChaCha8Rng, submit: u64, id: u64| JobSpec {
        id: JobId(id),
        submit_time: submit,
        cores: rng.random_range(w.cores_min..=cores_max),
        runtime: rng.random_range(w.runtime_min..=w.runtime_max),
        priority: 0,
    };

    match w.arrival {
        ArrivalProcess::Interval { mean_seconds } => {
            let mut t = 0.0f64;
            while (t as u64) < horizon {
                let id = jobs.len() as u64;
                let job = draw(&mut rng, t as u64, id);
                jobs.push(job);
                let u: f64 = rng.random();
                t += -mean_seconds * (1.0 - u).ln();
            }
        }
        ArrivalProcess::Saturated { backlog } => {
            // Closed loop against an idealised farm: one pool of
            // `num_servers * cores_per_server` slots, packed with skip-ahead
            // so it runs at least as hot as the real farm ever can. Whenever
            // the ideal farm starts work, the queue is topped back up, which
            // keeps the real simulation's queue non-empty without generating
            // unbounded backlog.
            let k = backlog.unwrap_or(4 * num_servers).max(1);
            let mut free: u32 = num_servers * cores_per_server;
            let mut queued: VecDeque<usize> = VecDeque::new();
            // Min-heap of (finish time, tiebreak, cores).
            let mut running: BinaryHeap<Reverse<(u64, u64, u32)>> = BinaryHeap::new();
            let mut ctr = 0u64;

            let mut settle = |t: u64,
                              free: &mut u32,
                              queued: &mut VecDeque<usize>,
                              running: &mut BinaryHeap<Reverse<(u64, u64, u32)>>,
                              jobs: &mut Vec<JobSpec>,
                              rng: &mut ChaCha8Rng| {
                loop {
                    while (queued.len() as u32) < k {
                        let id = jobs.len() as u64;
                        let job = draw(rng, t, id);
                        jobs.push(job);
                        queued.push_back(jobs.len() - 1);
                    }
                    let mut started = false;
                    let mut i = 0;
                    while i < queued.len() {
                        let idx = queued[i];
                        if jobs[idx].cores <= *free {
                            *free -= jobs[idx].cores;
                            running.push(Reverse((t + jobs[idx].runtime, ctr, jobs[idx].cores)));
                            ctr += 1;
                            queued.remove(i);
                            started = true;
                        } else {
                            i += 1;
                        }
                    }
                    if !started {
                        break;
                    }
                }
            };

            settle(0, &mut free, &mut queued, &mut running, &mut jobs, &mut rng);
            while let Some(&Reverse((finish, _, _))) = running.peek() {
                if finish >= horizon {
                    break;
                }
                while let Some(&Reverse((f, _, cores))) = running.peek() {
                    if f != finish {
                        break;
                    }
                    running.pop();
                    free += cores;
                }
                settle(finish, &mut free, &mut queued, &mut running, &mut jobs, &mut rng);
            }
        }
    }
    jobs
}

fn gen_worstcase(
    w: &WorstCaseWorkload,
    cores_per_server: u32,
    horizon: u64,
) -> Vec<JobSpec> {
    let mut jobs = Vec::new();
    let mut cycle_start = 0u64;
    while cycle_start < horizon {
        for _ in 0..w.monos_per_cycle {
            jobs.push(JobSpec {
                id: JobId(jobs.len() as u64),
                submit_time: cycle_start,
                cores: 1,
                runtime: w.long_runtime,
                priority: 0,
            });
        }
        if cycle_start + 1 < horizon {
            for _ in 0..w.fullcores_per_cycle {
                jobs.push(JobSpec {
                    id: JobId(jobs.len() as u64),
                    submit_time: cycle_start + 1,
                    cores: cores_per_server,
                    runtime: w.short_runtime,
                    priority: 0,
                });
            }
        }
        cycle_start += w.cycle_period;
    }
    jobs
}

pub fn save_trace(jobs: &[JobSpec], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| SimError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_trace(&mut w, jobs).map_err(|e| SimError::io(path, e))?;
    w.flush().map_err(|e| SimError::io(path, e))
}

pub fn write_trace(w: &mut impl Write, jobs: &[JobSpec]) -> std::io::Result<()> {
    writeln!(w, "# submit_time_s cores runtime_s priority")?;
    for job in jobs {
        writeln!(
            w,
            "{} {} {} {}",
            job.submit_time, job.cores, job.runtime, job.priority
        )?;
    }
    Ok(())
}

pub fn load_trace(path: &Path) -> Result<Vec<JobSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_trace(&text).map_err(|e| SimError::Trace(format!("{}: {e}", path.display())))
}

/// Parses trace text. Blank lines and `#` comments are ignored; everything
/// else must be four whitespace-separated fields.
pub fn parse_trace(text: &str) -> std::result::Result<Vec<JobSpec>, String> {
    let mut jobs: Vec<JobSpec> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(format!(
                "line {lineno}: expected 4 fields (submit_time_s cores runtime_s priority), got {}",
                fields.len()
            ));
        }
        let submit_time: u64 = fields[0]
            .parse()
            .map_err(|_| format!("line {lineno}: bad submit time `{}`", fields[0]))?;
        let cores: u32 = fields[1]
            .parse()
            .map_err(|_| format!("line {lineno}: bad core count `{}`", fields[1]))?;
        let runtime: u64 = fields[2]
            .parse()
            .map_err(|_| format!("line {lineno}: bad runtime `{}`", fields[2]))?;
        let priority: i64 = fields[3]
            .parse()
            .map_err(|_| format!("line {lineno}: bad priority `{}`", fields[3]))?;
        if cores == 0 {
            return Err(format!("line {lineno}: core count must be positive"));
        }
        if runtime == 0 {
            return Err(format!("line {lineno}: runtime must be positive"));
        }
        if let Some(prev) = jobs.last() {
            if submit_time < prev.submit_time {
                return Err(format!(
                    "line {lineno}: submit times must be non-decreasing ({submit_time} after {})",
                    prev.submit_time
                ));
            }
        }
        jobs.push(JobSpec {
            id: JobId(jobs.len() as u64),
            submit_time,
            cores,
            runtime,
            priority,
        });
    }
    Ok(jobs)
}
