//! Deterministic discrete-event simulator of a multi-core batch farm with a
//! runtime job-consolidation engine (the "job mover").
//!
//! A farm of identical servers runs a FIFO batch queue with configurable
//! placement (pack or spread). Multi-core jobs wedge behind fragmented
//! capacity; the mover periodically freezes and migrates running jobs to
//! concentrate free cores onto whole servers, which unblocks the queue and
//! lets drained servers power off.
//!
//! Module map:
//! - [`config`] / [`workload`]: experiment description, trace generation.
//! - [`cluster`]: servers, jobs, and the single mutable world-state.
//! - [`scheduler`]: queue order and server selection.
//! - [`mover`]: the two consolidation planners and the plan checker.
//! - [`engine`]: the event loop tying it all together.
//! - [`metrics`]: exact core-second accounting, CSV output, energy figures.
//! - [`oracle`]: test-support brute force and replay checking.
//! - [`cli`]: the `jobmover-sim` binary.

pub mod cli;
pub mod cluster;
pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod mover;
pub mod oracle;
pub mod scheduler;
pub mod workload;

pub use cluster::{ClusterState, JobId, JobSpec, ServerId};
pub use config::{MoverAlgorithm, PowerModel, SimConfig};
pub use engine::{run_pair, Simulation};
pub use error::{Result, SimError};
pub use metrics::{efficiency_improvement, energy, SimReport};
