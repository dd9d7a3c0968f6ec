//! Usage accounting and the derived efficiency metrics.
//!
//! Everything time-based is integer core-seconds or server-seconds; floats
//! only appear in the final ratios, so two runs of the same experiment agree
//! bit for bit.

use std::io::Write;

use crate::config::{PowerModel, SimConfig};
use crate::error::{Result, SimError};

/// One row of the usage time series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub time_s: u64,
    pub used_cores: u32,
    pub installed_cores: u32,
    pub powered_on_cores: u32,
    pub queued_jobs: u64,
    /// Integral of used cores over `[0, time_s]`.
    pub cumulative_core_seconds: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Totals {
    pub completed_jobs: u64,
    /// Jobs dispatched at least once; the denominator for `moved_fraction`.
    pub total_jobs_seen: u64,
    /// Distinct jobs migrated at least once.
    pub moved_jobs: u64,
    pub migration_events: u64,
    pub cumulative_core_seconds: u64,
    pub powered_on_server_seconds: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub config: SimConfig,
    pub samples: Vec<Sample>,
    pub totals: Totals,
}

pub const CSV_HEADER: &str =
    "time_s,used_cores,installed_cores,powered_on_cores,queued_jobs,cumulative_core_seconds";

impl SimReport {
    /// Fraction of installed capacity that did useful work over the run.
    pub fn exploitation(&self) -> f64 {
        let denom = self.config.installed_cores() as f64 * self.config.horizon as f64;
        if denom == 0.0 {
            return 0.0;
        }
        self.totals.cumulative_core_seconds as f64 / denom
    }

    /// Percentage of dispatched jobs that were migrated at least once.
    pub fn moved_fraction_pct(&self) -> f64 {
        if self.totals.total_jobs_seen == 0 {
            return 0.0;
        }
        100.0 * self.totals.moved_jobs as f64 / self.totals.total_jobs_seen as f64
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.time_s,
                s.used_cores,
                s.installed_cores,
                s.powered_on_cores,
                s.queued_jobs,
                s.cumulative_core_seconds
            )?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.csv_string()).map_err(|e| SimError::io(path, e))
    }
}

/// Percentage gain in total CPU work delivered by the mover:
/// `100 * (with / without - 1)`. The two reports must describe the same
/// experiment apart from the mover flag.
pub fn efficiency_improvement(with_mover: &SimReport, without_mover: &SimReport) -> Result<f64> {
    if !with_mover.config.comparable_to(&without_mover.config) {
        return Err(SimError::Comparison(
            "configs differ in more than the mover flag".into(),
        ));
    }
    let a = with_mover.totals.cumulative_core_seconds;
    let b = without_mover.totals.cumulative_core_seconds;
    if b == 0 {
        if a == 0 {
            return Ok(0.0);
        }
        return Err(SimError::Comparison(
            "baseline run performed no work; improvement is undefined".into(),
        ));
    }
    Ok(100.0 * (a as f64 / b as f64 - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub consumed_server_seconds: u64,
    /// Every server powered on for the whole horizon.
    pub baseline_server_seconds: u64,
    pub saving_pct: f64,
    /// Only when the power model carries a wattage.
    pub consumed_wh: Option<f64>,
    pub baseline_wh: Option<f64>,
}

/// Energy view of a run, against an everything-always-on baseline.
pub fn energy(report: &SimReport) -> EnergyReport {
    let consumed = report.totals.powered_on_server_seconds;
    let baseline = report.config.num_servers as u64 * report.config.horizon;
    let saving_pct = if baseline == 0 {
        0.0
    } else {
        100.0 * (1.0 - consumed as f64 / baseline as f64)
    };
    let watts = match report.config.power {
        PowerModel::Managed {
            watts_per_server, ..
        } => watts_per_server,
        PowerModel::AlwaysOn => None,
    };
    let to_wh = |server_seconds: u64, w: f64| server_seconds as f64 * w / 3600.0;
    EnergyReport {
        consumed_server_seconds: consumed,
        baseline_server_seconds: baseline,
        saving_pct,
        consumed_wh: watts.map(|w| to_wh(consumed, w)),
        baseline_wh: watts.map(|w| to_wh(baseline, w)),
    }
}

/// Streaming accumulator the engine drives while events are processed.
/// `advance_to` integrates the current usage level over the elapsed gap, so
/// the integrals are exact for piecewise-constant usage.
#[derive(Debug, Clone)]
pub(crate) struct Collector {
    installed_cores: u32,
    cores_per_server: u32,
    last_time: u64,
    used_integral: u64,
    on_integral: u64,
    samples: Vec<Sample>,
}

impl Collector {
    pub fn new(num_servers: u32, cores_per_server: u32) -> Self {
        Collector {
            installed_cores: num_servers * cores_per_server,
            cores_per_server,
            last_time: 0,
            used_integral: 0,
            on_integral: 0,
            samples: Vec::new(),
        }
    }

    pub fn advance_to(&mut self, t: u64, used_cores: u32, on_servers: u32) {
        debug_assert!(t >= self.last_time, "time went backwards");
        let dt = t - self.last_time;
        self.used_integral += used_cores as u64 * dt;
        self.on_integral += on_servers as u64 * dt;
        self.last_time = t;
    }

    /// Records a sample at the current accumulator time.
    pub fn record_sample(&mut self, used_cores: u32, on_servers: u32, queued_jobs: u64) {
        self.samples.push(Sample {
            time_s: self.last_time,
            used_cores,
            installed_cores: self.installed_cores,
            powered_on_cores: on_servers * self.cores_per_server,
            queued_jobs,
            cumulative_core_seconds: self.used_integral,
        });
    }

    pub fn used_integral(&self) -> u64 {
        self.used_integral
    }

    pub fn on_integral(&self) -> u64 {
        self.on_integral
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;

    fn report(config: SimConfig, ccs: u64) -> SimReport {
        SimReport {
            config,
            samples: Vec::new(),
            totals: Totals {
                cumulative_core_seconds: ccs,
                ..Totals::default()
            },
        }
    }

    #[test]
    fn exploitation_is_work_over_installed_capacity() {
        let mut config = SimConfig::new(4, 2);
        config.horizon = 1000;
        let r = report(config, 4000);
        assert!((r.exploitation() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn improvement_is_relative_core_seconds_gain() {
        let mut base = SimConfig::new(2, 2);
        base.horizon = 100;
        base.mover_enabled = false;
        let mut with = base.clone();
        with.mover_enabled = true;
        let imp = efficiency_improvement(&report(with, 150), &report(base, 100)).unwrap();
        assert!((imp - 50.0).abs() < 1e-12);
    }

    #[test]
    fn improvement_rejects_mismatched_configs() {
        let a = SimConfig::new(2, 2);
        let mut b = SimConfig::new(2, 2);
        b.rng_seed = 1;
        let err = efficiency_improvement(&report(a, 1), &report(b, 1)).unwrap_err();
        assert!(err.to_string().contains("mover flag"));
    }

    #[test]
    fn improvement_empty_runs_is_zero() {
        let a = SimConfig::new(2, 2);
        let mut b = a.clone();
        b.mover_enabled = !a.mover_enabled;
        assert_eq!(
            efficiency_improvement(&report(a.clone(), 0), &report(b.clone(), 0)).unwrap(),
            0.0
        );
        assert!(efficiency_improvement(&report(a, 5), &report(b, 0)).is_err());
    }

    #[test]
    fn moved_fraction_handles_zero_jobs() {
        let r = report(SimConfig::new(1, 1), 0);
        assert_eq!(r.moved_fraction_pct(), 0.0);
    }

    #[test]
    fn csv_layout_is_stable() {
        let mut config = SimConfig::new(2, 4);
        config.horizon = 200;
        let mut r = report(config, 800);
        r.samples = vec![
            Sample {
                time_s: 0,
                used_cores: 3,
                installed_cores: 8,
                powered_on_cores: 8,
                queued_jobs: 2,
                cumulative_core_seconds: 0,
            },
            Sample {
                time_s: 100,
                used_cores: 5,
                installed_cores: 8,
                powered_on_cores: 4,
                queued_jobs: 0,
                cumulative_core_seconds: 300,
            },
        ];
        assert_eq!(
            r.csv_string(),
            "time_s,used_cores,installed_cores,powered_on_cores,queued_jobs,cumulative_core_seconds\n\
             0,3,8,8,2,0\n\
             100,5,8,4,0,300\n"
        );
    }

    #[test]
    fn collector_integrates_piecewise_levels() {
        let mut c = Collector::new(2, 4);
        c.advance_to(10, 0, 2);
        c.record_sample(0, 2, 0);
        c.advance_to(30, 5, 1);
        assert_eq!(c.used_integral(), 100);
        assert_eq!(c.on_integral(), 40);
        c.record_sample(5, 1, 3);
        let s = c.into_samples();
        assert_eq!(s[1].time_s, 30);
        assert_eq!(s[1].powered_on_cores, 4);
        assert_eq!(s[1].cumulative_core_seconds, 100);
    }

    #[test]
    fn energy_against_all_on_baseline() {
        let mut config = SimConfig::new(2, 1);
        config.horizon = 100;
        config.power = PowerModel::Managed {
            power_on_delay: 0,
            watts_per_server: Some(360.0),
        };
        let mut r = report(config, 0);
        r.totals.powered_on_server_seconds = 150;
        let e = energy(&r);
        assert_eq!(e.baseline_server_seconds, 200);
        assert!((e.saving_pct - 25.0).abs() < 1e-12);
        assert!((e.consumed_wh.unwrap() - 15.0).abs() < 1e-12);
    }
}
