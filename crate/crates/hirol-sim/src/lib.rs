//! Deterministic discrete-event simulator for UAV ad-hoc routing.
//!
//! Three protocols run over the same mobility, radio, and traffic
//! models:
//!
//! - **OLSR** — proactive link-state routing with multipoint-relay
//!   flooding,
//! - **DSR** — reactive source routing with on-demand discovery and a
//!   route cache,
//! - **HIROL** — a hybrid that routes proactively inside a spatial zone
//!   and reactively across zones, filters candidate routes through a
//!   trained neural link classifier, and refines the survivors with a
//!   bee-colony optimizer.
//!
//! Runs are bit-reproducible: virtual time is integer microseconds,
//! every random draw comes from a named stream derived from the scenario
//! seed, and repeated runs of the same scenario produce identical event
//! traces and reports.
//!
//! See the crate examples for runnable walkthroughs of each subsystem
//! (`cargo run --example single_run`, `--example speed_sweep`, ...), and
//! the `hirol-sim` binary for the full experiment harness.

pub mod abc;
pub mod ann;
pub mod config;
pub mod dsr;
pub mod engine;
pub mod event;
pub mod hirol;
pub mod link;
pub mod metrics;
pub mod mobility;
pub mod olsr;
pub mod rng;
pub mod scenario;
pub mod sweep;
pub mod time;
pub mod training;

pub use engine::{run, run_with_classifier, RunOutput};
pub use metrics::MetricsReport;
pub use scenario::{Protocol, Scenario};
pub use time::SimTime;
