//! Python bindings: configs, paired runs, traces and reports, mirroring the
//! CLI's capabilities for use from notebooks and scripts.
//!
//! Traces cross the boundary as lists of `(submit_time_s, cores, runtime_s,
//! priority)` tuples; job ids are positional, exactly as in trace files.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use jobmover_sim::cluster::{JobId, JobSpec};
use jobmover_sim::config::{PlacementPolicy, PowerModel};
use jobmover_sim::error::SimError;
use jobmover_sim::{engine, metrics, workload, MoverAlgorithm};

fn to_py(err: SimError) -> PyErr {
    let msg = err.to_string();
    match err {
        SimError::Config(_) | SimError::Trace(_) | SimError::Comparison(_) => {
            PyValueError::new_err(msg)
        }
        SimError::Io { .. } => PyIOError::new_err(msg),
        SimError::Internal(_) | SimError::EmptyEventQueue => PyRuntimeError::new_err(msg),
    }
}

type JobTuple = (u64, u32, u64, i64);

fn to_specs(trace: &[JobTuple]) -> Vec<JobSpec> {
    trace
        .iter()
        .enumerate()
        .map(|(i, &(submit_time, cores, runtime, priority))| JobSpec {
            id: JobId(i as u64),
            submit_time,
            cores,
            runtime,
            priority,
        })
        .collect()
}

fn to_tuples(specs: &[JobSpec]) -> Vec<JobTuple> {
    specs
        .iter()
        .map(|j| (j.submit_time, j.cores, j.runtime, j.priority))
        .collect()
}

/// Experiment description: farm shape, scheduling and mover knobs, power
/// model, and the workload to run.
#[pyclass(name = "SimConfig", skip_from_py_object)]
#[derive(Clone)]
struct PySimConfig {
    inner: jobmover_sim::SimConfig,
}

#[pymethods]
impl PySimConfig {
    /// Farm of `num_servers` x `cores_per_server` with every other knob at
    /// its default (year horizon, hourly drain-greedy mover, pack
    /// placement, always-on power, saturated random workload).
    #[new]
    fn new(num_servers: u32, cores_per_server: u32) -> Self {
        PySimConfig {
            inner: jobmover_sim::SimConfig::new(num_servers, cores_per_server),
        }
    }

    /// Parses the flat `key = value` config-file format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        jobmover_sim::SimConfig::parse(text)
            .map(|inner| PySimConfig { inner })
            .map_err(PyValueError::new_err)
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        jobmover_sim::SimConfig::from_file(&path)
            .map(|inner| PySimConfig { inner })
            .map_err(to_py)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    #[getter]
    fn num_servers(&self) -> u32 {
        self.inner.num_servers
    }

    #[getter]
    fn cores_per_server(&self) -> u32 {
        self.inner.cores_per_server
    }

    #[getter]
    fn get_horizon(&self) -> u64 {
        self.inner.horizon
    }

    #[setter]
    fn set_horizon(&mut self, v: u64) {
        self.inner.horizon = v;
    }

    #[getter]
    fn get_mover_enabled(&self) -> bool {
        self.inner.mover_enabled
    }

    #[setter]
    fn set_mover_enabled(&mut self, v: bool) {
        self.inner.mover_enabled = v;
    }

    #[getter]
    fn get_mover_interval(&self) -> u64 {
        self.inner.mover_interval
    }

    #[setter]
    fn set_mover_interval(&mut self, v: u64) {
        self.inner.mover_interval = v;
    }

    #[getter]
    fn get_migration_downtime(&self) -> u64 {
        self.inner.migration_downtime
    }

    #[setter]
    fn set_migration_downtime(&mut self, v: u64) {
        self.inner.migration_downtime = v;
    }

    #[getter]
    fn get_rng_seed(&self) -> u64 {
        self.inner.rng_seed
    }

    #[setter]
    fn set_rng_seed(&mut self, v: u64) {
        self.inner.rng_seed = v;
    }

    #[getter]
    fn get_sample_interval(&self) -> u64 {
        self.inner.sample_interval
    }

    #[setter]
    fn set_sample_interval(&mut self, v: u64) {
        self.inner.sample_interval = v;
    }

    /// `"pack"` fills the fullest feasible server, `"spread"` the emptiest.
    #[getter]
    fn get_placement(&self) -> &'static str {
        self.inner.placement.as_str()
    }

    #[setter]
    fn set_placement(&mut self, v: &str) -> PyResult<()> {
        self.inner.placement = v.parse::<PlacementPolicy>().map_err(PyValueError::new_err)?;
        Ok(())
    }

    /// `"drain-greedy"` or `"ffd-repack"`.
    #[getter]
    fn get_mover_algorithm(&self) -> &'static str {
        self.inner.mover_algorithm.as_str()
    }

    #[setter]
    fn set_mover_algorithm(&mut self, v: &str) -> PyResult<()> {
        self.inner.mover_algorithm = v.parse::<MoverAlgorithm>().map_err(PyValueError::new_err)?;
        Ok(())
    }

    /// Minimum seconds between migrations of one job; `None` tracks the
    /// mover interval.
    #[getter]
    fn get_migration_cooldown(&self) -> Option<u64> {
        self.inner.per_job_migration_cooldown
    }

    #[setter]
    fn set_migration_cooldown(&mut self, v: Option<u64>) {
        self.inner.per_job_migration_cooldown = v;
    }

    /// `None` under the always-on model, `(power_on_delay, watts_per_server)`
    /// when drained servers are powered off.
    #[getter]
    fn power_managed(&self) -> Option<(u64, Option<f64>)> {
        match self.inner.power {
            PowerModel::AlwaysOn => None,
            PowerModel::Managed {
                power_on_delay,
                watts_per_server,
            } => Some((power_on_delay, watts_per_server)),
        }
    }

    /// Power servers off when drained and boot them on demand.
    #[pyo3(signature = (power_on_delay, watts_per_server=None))]
    fn set_power_managed(&mut self, power_on_delay: u64, watts_per_server: Option<f64>) {
        self.inner.power = PowerModel::Managed {
            power_on_delay,
            watts_per_server,
        };
    }

    fn set_always_on(&mut self) {
        self.inner.power = PowerModel::AlwaysOn;
    }

    fn __repr__(&self) -> String {
        format!(
            "SimConfig({} servers x {} cores, horizon {} s, mover {} every {} s, {} placement)",
            self.inner.num_servers,
            self.inner.cores_per_server,
            self.inner.horizon,
            if self.inner.mover_enabled {
                self.inner.mover_algorithm.as_str()
            } else {
                "off"
            },
            self.inner.mover_interval,
            self.inner.placement.as_str(),
        )
    }
}

/// Result of one run: the usage time series plus exact totals.
#[pyclass(name = "SimReport", frozen)]
struct PySimReport {
    inner: metrics::SimReport,
}

#[pymethods]
impl PySimReport {
    #[getter]
    fn completed_jobs(&self) -> u64 {
        self.inner.totals.completed_jobs
    }

    /// Jobs dispatched at least once.
    #[getter]
    fn total_jobs_seen(&self) -> u64 {
        self.inner.totals.total_jobs_seen
    }

    /// Distinct jobs migrated at least once.
    #[getter]
    fn moved_jobs(&self) -> u64 {
        self.inner.totals.moved_jobs
    }

    #[getter]
    fn migration_events(&self) -> u64 {
        self.inner.totals.migration_events
    }

    #[getter]
    fn cumulative_core_seconds(&self) -> u64 {
        self.inner.totals.cumulative_core_seconds
    }

    #[getter]
    fn powered_on_server_seconds(&self) -> u64 {
        self.inner.totals.powered_on_server_seconds
    }

    /// Fraction of installed capacity that did useful work, in [0, 1].
    fn exploitation(&self) -> f64 {
        self.inner.exploitation()
    }

    /// Percentage of dispatched jobs migrated at least once.
    fn moved_fraction_pct(&self) -> f64 {
        self.inner.moved_fraction_pct()
    }

    /// Rows of `(time_s, used_cores, installed_cores, powered_on_cores,
    /// queued_jobs, cumulative_core_seconds)`.
    fn samples(&self) -> Vec<(u64, u32, u32, u32, u64, u64)> {
        self.inner
            .samples
            .iter()
            .map(|s| {
                (
                    s.time_s,
                    s.used_cores,
                    s.installed_cores,
                    s.powered_on_cores,
                    s.queued_jobs,
                    s.cumulative_core_seconds,
                )
            })
            .collect()
    }

    /// The run's configuration, seed included, so results stay traceable.
    fn config(&self) -> PySimConfig {
        PySimConfig {
            inner: self.inner.config.clone(),
        }
    }

    fn csv(&self) -> String {
        self.inner.csv_string()
    }

    fn save_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save_csv(&path).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "SimReport({} completed, {} moved of {} seen, exploitation {:.3})",
            self.inner.totals.completed_jobs,
            self.inner.totals.moved_jobs,
            self.inner.totals.total_jobs_seen,
            self.inner.exploitation(),
        )
    }
}

fn resolve_trace(config: &PySimConfig, trace: Option<Vec<JobTuple>>) -> PyResult<Vec<JobSpec>> {
    match trace {
        Some(t) => Ok(to_specs(&t)),
        None => workload::generate(
            &config.inner.workload,
            config.inner.num_servers,
            config.inner.cores_per_server,
            config.inner.horizon,
            config.inner.rng_seed,
        )
        .map_err(to_py),
    }
}

/// Generates the config's workload as job tuples; `seed` overrides the
/// config's `rng_seed`.
#[pyfunction]
#[pyo3(signature = (config, seed=None))]
fn generate(config: &PySimConfig, seed: Option<u64>) -> PyResult<Vec<JobTuple>> {
    workload::generate(
        &config.inner.workload,
        config.inner.num_servers,
        config.inner.cores_per_server,
        config.inner.horizon,
        seed.unwrap_or(config.inner.rng_seed),
    )
    .map(|specs| to_tuples(&specs))
    .map_err(to_py)
}

#[pyfunction]
fn load_trace(path: std::path::PathBuf) -> PyResult<Vec<JobTuple>> {
    workload::load_trace(&path)
        .map(|specs| to_tuples(&specs))
        .map_err(to_py)
}

#[pyfunction]
fn save_trace(trace: Vec<JobTuple>, path: std::path::PathBuf) -> PyResult<()> {
    workload::save_trace(&to_specs(&trace), &path).map_err(to_py)
}

/// Runs the config as-is (honouring `mover_enabled`); generates the
/// workload unless an explicit trace is given.
#[pyfunction]
#[pyo3(signature = (config, trace=None))]
fn run(py: Python<'_>, config: &PySimConfig, trace: Option<Vec<JobTuple>>) -> PyResult<PySimReport> {
    let specs = resolve_trace(config, trace)?;
    let cfg = config.inner.clone();
    py.detach(|| engine::Simulation::run(cfg, &specs))
        .map(|inner| PySimReport { inner })
        .map_err(to_py)
}

/// Runs the same trace with the mover off and on; returns
/// `(baseline, mover)` reports.
#[pyfunction]
#[pyo3(signature = (config, trace=None))]
fn run_pair(
    py: Python<'_>,
    config: &PySimConfig,
    trace: Option<Vec<JobTuple>>,
) -> PyResult<(PySimReport, PySimReport)> {
    let specs = resolve_trace(config, trace)?;
    let cfg = config.inner.clone();
    py.detach(|| engine::run_pair(&cfg, &specs))
        .map(|(base, mover)| (PySimReport { inner: base }, PySimReport { inner: mover }))
        .map_err(to_py)
}

/// `100 * (with / without - 1)` on delivered core-seconds; the reports must
/// come from the same experiment apart from the mover flag.
#[pyfunction]
fn efficiency_improvement(with_mover: &PySimReport, without_mover: &PySimReport) -> PyResult<f64> {
    metrics::efficiency_improvement(&with_mover.inner, &without_mover.inner).map_err(to_py)
}

/// Energy view of a run against an everything-always-on fleet.
#[pyfunction]
fn energy<'py>(py: Python<'py>, report: &PySimReport) -> PyResult<Bound<'py, PyDict>> {
    let e = metrics::energy(&report.inner);
    let d = PyDict::new(py);
    d.set_item("consumed_server_seconds", e.consumed_server_seconds)?;
    d.set_item("baseline_server_seconds", e.baseline_server_seconds)?;
    d.set_item("saving_pct", e.saving_pct)?;
    d.set_item("consumed_wh", e.consumed_wh)?;
    d.set_item("baseline_wh", e.baseline_wh)?;
    Ok(d)
}

#[pymodule]
fn jobmover_sim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySimConfig>()?;
    m.add_class::<PySimReport>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(load_trace, m)?)?;
    m.add_function(wrap_pyfunction!(save_trace, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_pair, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    Ok(())
}
