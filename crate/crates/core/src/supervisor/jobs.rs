use std::process::Command;

use super::SupervisorError;

/// Cooperative job protocol. The supervisor calls `step` only when it has
/// granted the step, and `checkpoint` whenever it needs a restorable state.
pub trait SupervisedJob {
    fn steps_per_epoch(&self) -> u64;
    /// Runs one step. `epoch` is 1-based; `step` is the 1-based global count.
    fn step(&mut self, epoch: u64, step: u64) -> Result<(), SupervisorError>;
    /// Persists state and returns a reference to it.
    fn checkpoint(&mut self, step: u64) -> Result<String, SupervisorError>;
    fn epoch_done(&mut self, _epoch: u64) -> Result<(), SupervisorError> {
        Ok(())
    }
}

/// Built-in job that does nothing but count.
#[derive(Debug, Clone)]
pub struct DemoJob {
    pub steps_per_epoch: u64,
    pub steps_run: u64,
    /// Step at which the job reports a failure, for exercising error paths.
    pub fail_at: Option<u64>,
}

impl DemoJob {
    pub fn new(steps_per_epoch: u64) -> Self {
        Self {
            steps_per_epoch,
            steps_run: 0,
            fail_at: None,
        }
    }
}

impl SupervisedJob for DemoJob {
    fn steps_per_epoch(&self) -> u64 {
        self.steps_per_epoch
    }

    fn step(&mut self, _epoch: u64, step: u64) -> Result<(), SupervisorError> {
        if self.fail_at == Some(step) {
            return Err(SupervisorError::Job(format!("demo job failed at step {step}")));
        }
        self.steps_run += 1;
        Ok(())
    }

    fn checkpoint(&mut self, step: u64) -> Result<String, SupervisorError> {
        Ok(format!("step-{step}"))
    }
}

/// Runs an external command once per step with `SUPERVISOR_EPOCH` and
/// `SUPERVISOR_STEP` in its environment; a nonzero exit fails the job.
/// Checkpoints are the step reference only, since the command owns its
/// own state.
#[derive(Debug, Clone)]
pub struct CommandJob {
    pub program: String,
    pub args: Vec<String>,
    pub steps_per_epoch: u64,
}

impl SupervisedJob for CommandJob {
    fn steps_per_epoch(&self) -> u64 {
        self.steps_per_epoch
    }

    fn step(&mut self, epoch: u64, step: u64) -> Result<(), SupervisorError> {
        let status = Command::new(&self.program)
            .args(&self.args)
            .env("SUPERVISOR_EPOCH", epoch.to_string())
            .env("SUPERVISOR_STEP", step.to_string())
            .status()
            .map_err(|e| SupervisorError::Job(format!("{}: {e}", self.program)))?;
        if !status.success() {
            return Err(SupervisorError::Job(format!(
                "{} exited with {status} at step {step}",
                self.program
            )));
        }
        Ok(())
    }

    fn checkpoint(&mut self, step: u64) -> Result<String, SupervisorError> {
        Ok(format!("step-{step}"))
    }
}
