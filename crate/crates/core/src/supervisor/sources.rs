use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use super::policy::{parse_telemetry, TelemetrySample};
use super::SupervisorError;

/// Time source for the supervisor, in seconds since the Unix epoch.
pub trait Clock {
    fn now(&self) -> f64;
    fn sleep(&mut self, secs: f64);
    /// Called after each job step; lets a simulated clock charge step time.
    fn step_elapsed(&mut self) {}
}

#[derive(Debug, Clone, Default)]
pub struct WallClock;

impl Clock for WallClock {
    fn now(&self) -> f64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64())
    }

    fn sleep(&mut self, secs: f64) {
        if secs > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(secs));
        }
    }
}

/// Clock that never blocks: sleeping advances simulated time instantly.
#[derive(Debug, Clone, Default)]
pub struct SimulatedClock {
    t: f64,
    step_s: f64,
}

impl SimulatedClock {
    /// Starts at `start` seconds and charges `step_s` per job step.
    pub fn new(start: f64, step_s: f64) -> Self {
        Self { t: start, step_s }
    }
}

impl Clock for SimulatedClock {
    fn now(&self) -> f64 {
        self.t
    }

    fn sleep(&mut self, secs: f64) {
        self.t += secs.max(0.0);
    }

    fn step_elapsed(&mut self) {
        self.t += self.step_s;
    }
}

pub trait TelemetrySource {
    /// Reading taken after global step `step`.
    fn sample(&mut self, step: u64) -> Result<TelemetrySample, SupervisorError>;
}

/// Fixed baseline temperature with per-step overrides. Steps listed in
/// `failures` report a telemetry error.
#[derive(Debug, Clone)]
pub struct ScriptedTelemetry {
    pub baseline: TelemetrySample,
    pub overrides: BTreeMap<u64, f64>,
    pub failures: Vec<u64>,
}

impl ScriptedTelemetry {
    pub fn constant(temperature_c: f64) -> Self {
        Self {
            baseline: TelemetrySample {
                temperature_c,
                power_w: 90.0,
                memory_mb: 4096.0,
            },
            overrides: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    pub fn with_spike(mut self, step: u64, temperature_c: f64) -> Self {
        self.overrides.insert(step, temperature_c);
        self
    }
}

impl TelemetrySource for ScriptedTelemetry {
    fn sample(&mut self, step: u64) -> Result<TelemetrySample, SupervisorError> {
        if self.failures.contains(&step) {
            return Err(SupervisorError::Telemetry(format!("scripted failure at step {step}")));
        }
        let mut s = self.baseline;
        if let Some(&t) = self.overrides.get(&step) {
            s.temperature_c = t;
        }
        Ok(s)
    }
}

/// Replays CSV telemetry lines, one per poll; the last line repeats once
/// the file is exhausted.
#[derive(Debug, Clone)]
pub struct ReplayTelemetry {
    lines: Vec<String>,
    next: usize,
}

impl ReplayTelemetry {
    pub fn from_text(text: &str) -> Result<Self, SupervisorError> {
        let lines: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
        if lines.is_empty() {
            return Err(SupervisorError::Telemetry("replay file has no samples".into()));
        }
        Ok(Self { lines, next: 0 })
    }

    pub fn from_file(path: &Path) -> Result<Self, SupervisorError> {
        let text = std::fs::read_to_string(path).map_err(|source| SupervisorError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }
}

impl TelemetrySource for ReplayTelemetry {
    fn sample(&mut self, _step: u64) -> Result<TelemetrySample, SupervisorError> {
        let line = &self.lines[self.next.min(self.lines.len() - 1)];
        self.next += 1;
        parse_telemetry(line)
    }
}

/// Queries the first GPU through `nvidia-smi`.
#[derive(Debug, Clone)]
pub struct NvidiaSmiTelemetry {
    pub program: String,
}

impl Default for NvidiaSmiTelemetry {
    fn default() -> Self {
        Self {
            program: "nvidia-smi".into(),
        }
    }
}

impl TelemetrySource for NvidiaSmiTelemetry {
    fn sample(&mut self, _step: u64) -> Result<TelemetrySample, SupervisorError> {
        let out = Command::new(&self.program)
            .args([
                "--query-gpu=temperature.gpu,power.draw,memory.used",
                "--format=csv,noheader,nounits",
            ])
            .output()
            .map_err(|e| SupervisorError::Telemetry(format!("{}: {e}", self.program)))?;
        if !out.status.success() {
            return Err(SupervisorError::Telemetry(format!(
                "{} exited with {}",
                self.program, out.status
            )));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let first = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| SupervisorError::Telemetry(format!("{} printed nothing", self.program)))?;
        parse_telemetry(first)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_repeats_last_line() {
        let mut r = ReplayTelemetry::from_text("# header\n70, 80, 100\n\n90, 81, 100\n").unwrap();
        let temps: Vec<f64> = (0..4).map(|i| r.sample(i).unwrap().temperature_c).collect();
        assert_eq!(temps, vec![70.0, 90.0, 90.0, 90.0]);
        assert!(ReplayTelemetry::from_text("\n").is_err());
    }

    #[test]
    fn scripted() {
        let mut s = ScriptedTelemetry::constant(70.0).with_spike(30, 86.0);
        assert_eq!(s.sample(20).unwrap().temperature_c, 70.0);
        assert_eq!(s.sample(30).unwrap().temperature_c, 86.0);
        s.failures.push(40);
        assert!(s.sample(40).is_err());
    }

    #[test]
    fn missing_binary_is_an_error() {
        let mut n = NvidiaSmiTelemetry {
            program: "/nonexistent/nvidia-smi".into(),
        };
        assert!(matches!(n.sample(10), Err(SupervisorError::Telemetry(_))));
    }

    #[test]
    fn simulated_clock() {
        let mut c = SimulatedClock::new(100.0, 0.5);
        c.step_elapsed();
        c.sleep(30.0);
        assert_eq!(c.now(), 130.5);
    }
}
