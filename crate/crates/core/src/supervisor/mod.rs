//! Thermal-aware supervision of long-running step-based jobs: telemetry
//! polling, cooling pauses, step-gated checkpoints and chunked epochs.

mod jobs;
mod policy;
mod run;
mod sources;

use std::path::PathBuf;

use thiserror::Error;

pub use jobs::{CommandJob, DemoJob, SupervisedJob};
pub use policy::{
    chunk_sizes, evaluate_policy, parse_telemetry, step_gate, Action, StepGate, TelemetrySample,
    ThermalPolicy,
};
pub use run::{
    iso_timestamp, run_chunked, CleanupHook, EventKind, EventLog, RunSummary, SupervisorEvent,
};
pub use sources::{
    Clock, NvidiaSmiTelemetry, ReplayTelemetry, ScriptedTelemetry, SimulatedClock,
    TelemetrySource, WallClock,
};

#[derive(Debug, Error)]
pub enum SupervisorError {
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("telemetry: {0}")]
    Telemetry(String),
    #[error("job: {0}")]
    Job(String),
    #[error("event log: {0}")]
    Log(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
