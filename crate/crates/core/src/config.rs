//! Run configuration and the flat `key = value` config-file format.
//!
//! Every knob has a default except the farm dimensions; a minimal config is
//! two lines (`num_servers`, `cores_per_server`). Unknown keys and keys that
//! do not apply to the selected workload are rejected rather than ignored so
//! typos surface as errors instead of silently changing an experiment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Result, SimError};
use crate::workload::{ArrivalProcess, RandomWorkload, WorkloadSpec, WorstCaseWorkload};

/// One year of simulated time; runs use an integer-second clock throughout.
pub const DEFAULT_HORIZON: u64 = 31_536_000;
pub const DEFAULT_MOVER_INTERVAL: u64 = 3_600;
pub const DEFAULT_MIGRATION_DOWNTIME: u64 = 60;
pub const DEFAULT_SAMPLE_INTERVAL: u64 = 3_600;

/// Consolidation strategy run at every mover tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MoverAlgorithm {
    /// Fully drain the least-loaded servers into more-loaded ones.
    DrainGreedy,
    /// Global first-fit-decreasing repack of all movable jobs.
    FfdRepack,
}

impl MoverAlgorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            MoverAlgorithm::DrainGreedy => "drain-greedy",
            MoverAlgorithm::FfdRepack => "ffd-repack",
        }
    }
}

impl fmt::Display for MoverAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MoverAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "drain-greedy" => Ok(MoverAlgorithm::DrainGreedy),
            "ffd-repack" => Ok(MoverAlgorithm::FfdRepack),
            other => Err(format!(
                "unknown mover algorithm `{other}` (expected `drain-greedy` or `ffd-repack`)"
            )),
        }
    }
}

/// Dispatcher placement policy.
///
/// `Pack` fills the minimum number of servers: among powered-on servers that
/// fit the job it picks the one with the fewest free cores. `Spread` balances
/// load instead, picking the feasible server with the most free cores — the
/// behaviour of an untuned farm, and the foil that makes consolidation
/// worth measuring. Ties break toward the lowest server id in both policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlacementPolicy {
    Pack,
    Spread,
}

impl PlacementPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlacementPolicy::Pack => "pack",
            PlacementPolicy::Spread => "spread",
        }
    }
}

impl fmt::Display for PlacementPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlacementPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pack" => Ok(PlacementPolicy::Pack),
            "spread" => Ok(PlacementPolicy::Spread),
            other => Err(format!(
                "unknown placement policy `{other}` (expected `pack` or `spread`)"
            )),
        }
    }
}

/// Server power model.
///
/// `AlwaysOn` keeps every server powered for the whole run. `Managed` powers
/// servers off as soon as they are drained and back on when the dispatcher
/// needs them; booting takes `power_on_delay` seconds during which the server
/// draws power but cannot run jobs.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerModel {
    AlwaysOn,
    Managed {
        power_on_delay: u64,
        /// Enables reporting in watt-hours instead of server-seconds.
        watts_per_server: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub num_servers: u32,
    pub cores_per_server: u32,
    /// End of simulated time, in seconds. Events at `t <= horizon` are
    /// processed; everything later stays pending.
    pub horizon: u64,
    pub mover_enabled: bool,
    pub mover_interval: u64,
    pub mover_algorithm: MoverAlgorithm,
    /// Checkpoint/restart freeze window per migration, in seconds.
    pub migration_downtime: u64,
    pub placement: PlacementPolicy,
    /// Minimum time between consecutive migrations of one job.
    /// `None` means "track `mover_interval`".
    pub per_job_migration_cooldown: Option<u64>,
    pub power: PowerModel,
    pub rng_seed: u64,
    pub sample_interval: u64,
    pub workload: WorkloadSpec,
}

impl SimConfig {
    /// A config with the given farm dimensions and every other knob at its
    /// default: one-year horizon, hourly mover ticks, drain-greedy, 60 s
    /// migration downtime, pack placement, always-on power, saturated
    /// random workload.
    pub fn new(num_servers: u32, cores_per_server: u32) -> Self {
        SimConfig {
            num_servers,
            cores_per_server,
            horizon: DEFAULT_HORIZON,
            mover_enabled: true,
            mover_interval: DEFAULT_MOVER_INTERVAL,
            mover_algorithm: MoverAlgorithm::DrainGreedy,
            migration_downtime: DEFAULT_MIGRATION_DOWNTIME,
            placement: PlacementPolicy::Pack,
            per_job_migration_cooldown: None,
            power: PowerModel::AlwaysOn,
            rng_seed: 0,
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            workload: WorkloadSpec::Random(RandomWorkload::default()),
        }
    }

    pub fn cooldown(&self) -> u64 {
        self.per_job_migration_cooldown
            .unwrap_or(self.mover_interval)
    }

    pub fn installed_cores(&self) -> u32 {
        self.num_servers * self.cores_per_server
    }

    pub fn power_managed(&self) -> bool {
        matches!(self.power, PowerModel::Managed { .. })
    }

    pub fn power_on_delay(&self) -> u64 {
        match self.power {
            PowerModel::AlwaysOn => 0,
            PowerModel::Managed { power_on_delay, .. } => power_on_delay,
        }
    }

    /// True when `other` describes the same experiment apart from the mover
    /// on/off flag; efficiency comparisons require this.
    pub fn comparable_to(&self, other: &SimConfig) -> bool {
        let mut a = self.clone();
        let mut b = other.clone();
        a.mover_enabled = false;
        b.mover_enabled = false;
        a == b
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(SimError::Config(msg));
        if self.num_servers == 0 {
            return err("num_servers must be at least 1".into());
        }
        if self.cores_per_server == 0 {
            return err("cores_per_server must be at least 1".into());
        }
        if self.horizon == 0 {
            return err("horizon must be positive".into());
        }
        if self.mover_interval == 0 {
            return err("mover_interval must be positive".into());
        }
        if self.sample_interval == 0 {
            return err("sample_interval must be positive".into());
        }
        if let PowerModel::Managed {
            watts_per_server: Some(w),
            ..
        } = self.power
        {
            if !w.is_finite() || w <= 0.0 {
                return err("watts_per_server must be positive".into());
            }
        }
        self.workload.validate(self.cores_per_server)?;
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::parse(&text)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))
    }

    /// Parses the flat `key = value` format. `#` starts a comment, blank
    /// lines are ignored, duplicate keys are an error.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut raw: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {lineno}: expected `key = value`"))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(format!("line {lineno}: empty key or value"));
            }
            if raw.insert(key.clone(), (value, lineno)).is_some() {
                return Err(format!("line {lineno}: duplicate key `{key}`"));
            }
        }
        Self::from_raw(raw)
    }

    fn from_raw(
        mut raw: BTreeMap<String, (String, usize)>,
    ) -> std::result::Result<Self, String> {
        fn take<T: FromStr>(
            raw: &mut BTreeMap<String, (String, usize)>,
            key: &str,
        ) -> std::result::Result<Option<T>, String>
        where
            T::Err: fmt::Display,
        {
            match raw.remove(key) {
                None => Ok(None),
                Some((value, lineno)) => value.parse::<T>().map(Some).map_err(|e| {
                    format!("line {lineno}: bad value `{value}` for `{key}`: {e}")
                }),
            }
        }

        let num_servers: u32 =
            take(&mut raw, "num_servers")?.ok_or("missing required key `num_servers`")?;
        let cores_per_server: u32 = take(&mut raw, "cores_per_server")?
            .ok_or("missing required key `cores_per_server`")?;

        let mut config = SimConfig::new(num_servers, cores_per_server);
        if let Some(v) = take(&mut raw, "horizon")? {
            config.horizon = v;
        }
        if let Some(v) = take(&mut raw, "mover_enabled")? {
            config.mover_enabled = v;
        }
        if let Some(v) = take(&mut raw, "mover_interval")? {
            config.mover_interval = v;
        }
        if let Some(v) = take(&mut raw, "mover_algorithm")? {
            config.mover_algorithm = v;
        }
        if let Some(v) = take(&mut raw, "migration_downtime")? {
            config.migration_downtime = v;
        }
        if let Some(v) = take(&mut raw, "placement")? {
            config.placement = v;
        }
        if let Some(v) = take(&mut raw, "per_job_migration_cooldown")? {
            config.per_job_migration_cooldown = Some(v);
        }
        if let Some(v) = take(&mut raw, "rng_seed")? {
            config.rng_seed = v;
        }
        if let Some(v) = take(&mut raw, "sample_interval")? {
            config.sample_interval = v;
        }

        let managed = match take::<String>(&mut raw, "power_management")?.as_deref() {
            None | Some("off") => false,
            Some("on") => true,
            Some(other) => {
                return Err(format!(
                    "bad value `{other}` for `power_management` (expected `on` or `off`)"
                ))
            }
        };
        let power_on_delay: Option<u64> = take(&mut raw, "power_on_delay")?;
        let watts_per_server: Option<f64> = take(&mut raw, "watts_per_server")?;
        if managed {
            config.power = PowerModel::Managed {
                power_on_delay: power_on_delay.unwrap_or(0),
                watts_per_server,
            };
        } else if power_on_delay.is_some() || watts_per_server.is_some() {
            return Err(
                "power_on_delay / watts_per_server require `power_management = on`".into(),
            );
        }

        let kind = take::<String>(&mut raw, "workload")?.unwrap_or_else(|| "random".into());
        config.workload = match kind.as_str() {
            "random" => {
                let mut w = RandomWorkload::default();
                if let Some(v) = take(&mut raw, "cores_min")? {
                    w.cores_min = v;
                }
                if let Some(v) = take(&mut raw, "cores_max")? {
                    w.cores_max = Some(v);
                }
                if let Some(v) = take(&mut raw, "runtime_min")? {
                    w.runtime_min = v;
                }
                if let Some(v) = take(&mut raw, "runtime_max")? {
                    w.runtime_max = v;
                }
                let arrival = take::<String>(&mut raw, "arrival")?;
                match arrival.as_deref() {
                    None | Some("saturated") => {
                        w.arrival = ArrivalProcess::Saturated {
                            backlog: take(&mut raw, "backlog")?,
                        };
                    }
                    Some("interval") => {
                        let mean = take(&mut raw, "mean_interarrival")?
                            .ok_or("arrival = interval requires `mean_interarrival`")?;
                        w.arrival = ArrivalProcess::Interval {
                            mean_seconds: mean,
                        };
                    }
                    Some(other) => {
                        return Err(format!(
                            "bad value `{other}` for `arrival` (expected `saturated` or `interval`)"
                        ))
                    }
                }
                WorkloadSpec::Random(w)
            }
            "worstcase" => {
                let mut w = WorstCaseWorkload::default();
                if let Some(v) = take(&mut raw, "long_runtime")? {
                    w.long_runtime = v;
                }
                if let Some(v) = take(&mut raw, "short_runtime")? {
                    w.short_runtime = v;
                }
                if let Some(v) = take(&mut raw, "monos_per_cycle")? {
                    w.monos_per_cycle = v;
                }
                if let Some(v) = take(&mut raw, "fullcores_per_cycle")? {
                    w.fullcores_per_cycle = v;
                }
                if let Some(v) = take(&mut raw, "cycle_period")? {
                    w.cycle_period = v;
                }
                WorkloadSpec::WorstCase(w)
            }
            "trace" => {
                let path: String =
                    take(&mut raw, "trace_file")?.ok_or("workload = trace requires `trace_file`")?;
                WorkloadSpec::TraceFile {
                    path: PathBuf::from(path),
                }
            }
            other => {
                return Err(format!(
                    "bad value `{other}` for `workload` (expected `random`, `worstcase` or `trace`)"
                ))
            }
        };

        if let Some((key, (_, lineno))) = raw.iter().next() {
            return Err(format!(
                "line {lineno}: key `{key}` is unknown or does not apply to this workload"
            ));
        }

        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}
