use std::io::Write;

use chrono::{DateTime, SecondsFormat};
use serde::{Deserialize, Serialize};

use super::jobs::SupervisedJob;
use super::policy::{chunk_sizes, evaluate_policy, step_gate, Action, TelemetrySample, ThermalPolicy};
use super::sources::{Clock, TelemetrySource};
use super::SupervisorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ChunkStart,
    Poll,
    TelemetryLost,
    WarnPause,
    CriticalPause,
    Checkpoint,
    Resume,
    EpochDone,
    ChunkBreak,
    JobFailed,
    JobDone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisorEvent {
    pub seq: u64,
    /// ISO-8601 UTC.
    pub timestamp: String,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<TelemetrySample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl SupervisorEvent {
    fn new(kind: EventKind) -> Self {
        Self {
            seq: 0,
            timestamp: String::new(),
            kind,
            step: None,
            epoch: None,
            chunk: None,
            sample: None,
            duration_s: None,
            detail: None,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

pub fn iso_timestamp(secs: f64) -> String {
    let whole = secs.floor();
    let nanos = ((secs - whole) * 1e9).round().min(999_999_999.0) as u32;
    DateTime::from_timestamp(whole as i64, nanos)
        .unwrap_or_default()
        .to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Append-only event log. Every event is kept in memory and, when a sink
/// is attached, written as one JSON line as soon as it happens.
pub struct EventLog {
    events: Vec<SupervisorEvent>,
    sink: Option<Box<dyn Write>>,
}

impl Default for EventLog {
    fn default() -> Self {
        Self::new()
    }
}

impl EventLog {
    pub fn new() -> Self {
        Self {
            events: Vec::new(),
            sink: None,
        }
    }

    pub fn with_sink(sink: Box<dyn Write>) -> Self {
        Self {
            events: Vec::new(),
            sink: Some(sink),
        }
    }

    pub fn events(&self) -> &[SupervisorEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<SupervisorEvent> {
        self.events
    }

    fn push(&mut self, clock: &dyn Clock, mut e: SupervisorEvent) -> Result<(), SupervisorError> {
        e.seq = self.events.len() as u64;
        e.timestamp = iso_timestamp(clock.now());
        if let Some(w) = self.sink.as_mut() {
            writeln!(w, "{}", e.to_json_line())
                .and_then(|_| w.flush())
                .map_err(|e| SupervisorError::Log(e.to_string()))?;
        }
        self.events.push(e);
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        self.events.iter().map(|e| e.to_json_line() + "\n").collect()
    }
}

/// Named action run on every critical pause, e.g. freeing caches.
pub struct CleanupHook {
    pub name: String,
    pub run: Box<dyn FnMut()>,
}

impl CleanupHook {
    pub fn new(name: &str, run: impl FnMut() + 'static) -> Self {
        Self {
            name: name.to_string(),
            run: Box::new(run),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub completed: bool,
    pub steps_run: u64,
    pub last_checkpoint: Option<String>,
}

struct Supervisor<'a> {
    policy: &'a ThermalPolicy,
    clock: &'a mut dyn Clock,
    log: &'a mut EventLog,
    last_checkpoint: Option<String>,
}

impl Supervisor<'_> {
    fn emit(&mut self, e: SupervisorEvent) -> Result<(), SupervisorError> {
        self.log.push(&*self.clock, e)
    }

    fn checkpoint(
        &mut self,
        job: &mut dyn SupervisedJob,
        step: u64,
        epoch: u64,
        reason: &str,
    ) -> Result<(), SupervisorError> {
        let reference = job.checkpoint(step)?;
        self.last_checkpoint = Some(reference.clone());
        self.emit(SupervisorEvent {
            step: Some(step),
            epoch: Some(epoch),
            detail: Some(format!("{reason}: {reference}")),
            ..SupervisorEvent::new(EventKind::Checkpoint)
        })
    }

    fn pause(&mut self, kind: EventKind, step: u64, duration_s: f64, detail: Option<String>) -> Result<(), SupervisorError> {
        self.emit(SupervisorEvent {
            step: Some(step),
            duration_s: Some(duration_s),
            detail,
            ..SupervisorEvent::new(kind)
        })?;
        self.clock.sleep(duration_s);
        self.emit(SupervisorEvent {
            step: Some(step),
            ..SupervisorEvent::new(EventKind::Resume)
        })
    }
}

/// Runs `total_epochs` epochs of `job` in chunks, polling telemetry and
/// checkpointing on the policy's step cadence.
///
/// After each step: poll if due (pausing on warm or hot readings, with a
/// checkpoint right before any critical pause), then the periodic checkpoint
/// if due. A telemetry failure is logged and treated as a warning-level
/// reading. A job failure is logged with the last checkpoint and returned as
/// an incomplete run.
pub fn run_chunked(
    total_epochs: u64,
    policy: &ThermalPolicy,
    job: &mut dyn SupervisedJob,
    telemetry: &mut dyn TelemetrySource,
    clock: &mut dyn Clock,
    hooks: &mut [CleanupHook],
    log: &mut EventLog,
) -> Result<RunSummary, SupervisorError> {
    policy.validate()?;
    if total_epochs == 0 {
        return Err(SupervisorError::Policy("total_epochs must be at least 1".into()));
    }
    let spe = job.steps_per_epoch();
    if spe == 0 {
        return Err(SupervisorError::Policy("job reports zero steps per epoch".into()));
    }
    let mut sup = Supervisor {
        policy,
        clock,
        log,
        last_checkpoint: None,
    };
    let chunks = chunk_sizes(total_epochs, policy.chunk_epochs);
    let mut epoch = 0u64;
    let mut step = 0u64;
    for (ci, &n) in chunks.iter().enumerate() {
        let chunk = ci as u64 + 1;
        sup.emit(SupervisorEvent {
            chunk: Some(chunk),
            epoch: Some(epoch + 1),
            detail: Some(format!("epochs {}-{}", epoch + 1, epoch + n)),
            ..SupervisorEvent::new(EventKind::ChunkStart)
        })?;
        for _ in 0..n {
            epoch += 1;
            for _ in 0..spe {
                step += 1;
                if let Err(e) = job.step(epoch, step) {
                    let last = sup.last_checkpoint.clone();
                    sup.emit(SupervisorEvent {
                        step: Some(step),
                        epoch: Some(epoch),
                        detail: Some(format!(
                            "{e}; last checkpoint: {}",
                            last.as_deref().unwrap_or("none")
                        )),
                        ..SupervisorEvent::new(EventKind::JobFailed)
                    })?;
                    return Ok(RunSummary {
                        completed: false,
                        steps_run: step - 1,
                        last_checkpoint: last,
                    });
                }
                sup.clock.step_elapsed();
                let gate = step_gate(step, sup.policy);
                if gate.poll {
                    poll(&mut sup, job, telemetry, hooks, step, epoch)?;
                }
                if gate.checkpoint {
                    sup.checkpoint(job, step, epoch, "periodic")?;
                }
            }
            job.epoch_done(epoch)?;
            sup.emit(SupervisorEvent {
                epoch: Some(epoch),
                step: Some(step),
                ..SupervisorEvent::new(EventKind::EpochDone)
            })?;
        }
        if ci + 1 < chunks.len() {
            let d = sup.policy.chunk_break_s;
            sup.emit(SupervisorEvent {
                chunk: Some(chunk),
                duration_s: Some(d),
                ..SupervisorEvent::new(EventKind::ChunkBreak)
            })?;
            sup.clock.sleep(d);
        }
    }
    sup.emit(SupervisorEvent {
        epoch: Some(epoch),
        step: Some(step),
        ..SupervisorEvent::new(EventKind::JobDone)
    })?;
    Ok(RunSummary {
        completed: true,
        steps_run: step,
        last_checkpoint: sup.last_checkpoint,
    })
}

fn poll(
    sup: &mut Supervisor<'_>,
    job: &mut dyn SupervisedJob,
    telemetry: &mut dyn TelemetrySource,
    hooks: &mut [CleanupHook],
    step: u64,
    epoch: u64,
) -> Result<(), SupervisorError> {
    let action = match telemetry.sample(step) {
        Ok(sample) => {
            sup.emit(SupervisorEvent {
                step: Some(step),
                epoch: Some(epoch),
                sample: Some(sample),
                ..SupervisorEvent::new(EventKind::Poll)
            })?;
            evaluate_policy(&sample, sup.policy)
        }
        Err(e) => {
            sup.emit(SupervisorEvent {
                step: Some(step),
                epoch: Some(epoch),
                detail: Some(e.to_string()),
                ..SupervisorEvent::new(EventKind::TelemetryLost)
            })?;
            Action::WarnPause {
                duration_s: sup.policy.warn_pause_s,
            }
        }
    };
    match action {
        Action::NoAction => Ok(()),
        Action::WarnPause { duration_s } => sup.pause(EventKind::WarnPause, step, duration_s, None),
        Action::CriticalPause { duration_s } => {
            let mut ran = Vec::with_capacity(hooks.len());
            for h in hooks.iter_mut() {
                (h.run)();
                ran.push(h.name.clone());
            }
            sup.checkpoint(job, step, epoch, "critical")?;
            let detail = (!ran.is_empty()).then(|| format!("cleanup: {}", ran.join(", ")));
            sup.pause(EventKind::CriticalPause, step, duration_s, detail)
        }
    }
}
