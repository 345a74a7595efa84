use serde::{Deserialize, Serialize};

use super::SupervisorError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalPolicy {
    pub warn_c: f64,
    pub critical_c: f64,
    pub warn_pause_s: f64,
    pub critical_pause_s: f64,
    pub poll_every_steps: u64,
    pub checkpoint_every_steps: u64,
    pub chunk_epochs: u64,
    pub chunk_break_s: f64,
}

impl Default for ThermalPolicy {
    fn default() -> Self {
        Self {
            warn_c: 75.0,
            critical_c: 85.0,
            warn_pause_s: 30.0,
            critical_pause_s: 120.0,
            poll_every_steps: 10,
            checkpoint_every_steps: 50,
            chunk_epochs: 5,
            chunk_break_s: 300.0,
        }
    }
}

impl ThermalPolicy {
    pub fn validate(&self) -> Result<(), SupervisorError> {
        let bad = |m: &str| Err(SupervisorError::Policy(m.to_string()));
        if !(self.warn_c.is_finite() && self.critical_c.is_finite() && self.warn_c < self.critical_c) {
            return bad("warn_c must be below critical_c");
        }
        for (name, v) in [
            ("warn_pause_s", self.warn_pause_s),
            ("critical_pause_s", self.critical_pause_s),
            ("chunk_break_s", self.chunk_break_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("poll_every_steps", self.poll_every_steps),
            ("checkpoint_every_steps", self.checkpoint_every_steps),
            ("chunk_epochs", self.chunk_epochs),
        ] {
            if v == 0 {
                return bad(&format!("{name} must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SupervisorError> {
        let p: ThermalPolicy =
            serde_json::from_str(text).map_err(|e| SupervisorError::Policy(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

/// One GPU reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub temperature_c: f64,
    pub power_w: f64,
    pub memory_mb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    NoAction,
    WarnPause { duration_s: f64 },
    /// Also runs the cleanup hooks and saves a checkpoint before pausing.
    CriticalPause { duration_s: f64 },
}

/// Inclusive thresholds: critical first, then warning.
pub fn evaluate_policy(sample: &TelemetrySample, policy: &ThermalPolicy) -> Action {
    if sample.temperature_c >= policy.critical_c {
        Action::CriticalPause {
            duration_s: policy.critical_pause_s,
        }
    } else if sample.temperature_c >= policy.warn_c {
        Action::WarnPause {
            duration_s: policy.warn_pause_s,
        }
    } else {
        Action::NoAction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepGate {
    pub poll: bool,
    pub checkpoint: bool,
}

/// Which periodic actions fall due after global step `step` (1-based).
pub fn step_gate(step: u64, policy: &ThermalPolicy) -> StepGate {
    StepGate {
        poll: step > 0 && step % policy.poll_every_steps == 0,
        checkpoint: step > 0 && step % policy.checkpoint_every_steps == 0,
    }
}

/// Epoch counts of each chunk, e.g. 12 epochs in chunks of 5 gives `[5, 5, 2]`.
pub fn chunk_sizes(total_epochs: u64, chunk_epochs: u64) -> Vec<u64> {
    let chunk = chunk_epochs.max(1);
    (0..total_epochs.div_ceil(chunk))
        .map(|i| chunk.min(total_epochs - i * chunk))
        .collect()
}

fn parse_field(raw: &str) -> Option<f64> {
    let t = raw.trim();
    let numeric_end = t
        .char_indices()
        .find(|&(_, c)| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+')))
        .map_or(t.len(), |(i, _)| i);
    let (num, unit) = t.split_at(numeric_end);
    let unit = unit.trim();
    if num.is_empty() || !unit.chars().all(|c| c.is_alphabetic() || c == '°' || c == '%') {
        return None;
    }
    num.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses one `temperature, power, memory` line as printed by
/// `nvidia-smi --query-gpu=temperature.gpu,power.draw,memory.used
/// --format=csv,noheader,nounits`. Unit suffixes such as `W` or `MiB` are
/// tolerated.
pub fn parse_telemetry(line: &str) -> Result<TelemetrySample, SupervisorError> {
    let err = |reason: String| SupervisorError::Telemetry(format!("{reason} in {line:?}"));
    let fields: Vec<&str> = line.trim().split(',').collect();
    if fields.len() != 3 {
        return Err(err(format!("expected 3 fields, got {}", fields.len())));
    }
    let mut vals = [0.0; 3];
    for (i, f) in fields.iter().enumerate() {
        vals[i] = parse_field(f).ok_or_else(|| err(format!("field {} is not numeric", i + 1)))?;
    }
    if vals[2] < 0.0 {
        return Err(err("memory must be non-negative".into()));
    }
    Ok(TelemetrySample {
        temperature_c: vals[0],
        power_w: vals[1],
        memory_mb: vals[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(t: f64) -> TelemetrySample {
        TelemetrySample {
            temperature_c: t,
            power_w: 90.0,
            memory_mb: 4096.0,
        }
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse_telemetry("76, 95.5, 4096").unwrap(),
            TelemetrySample { temperature_c: 76.0, power_w: 95.5, memory_mb: 4096.0 }
        );
        assert_eq!(
            parse_telemetry("74, 80.0, 1024 MiB").unwrap(),
            TelemetrySample { temperature_c: 74.0, power_w: 80.0, memory_mb: 1024.0 }
        );
        assert_eq!(parse_telemetry(" 74 C, 80.0 W, 1024MiB\n").unwrap().power_w, 80.0);
        let e = parse_telemetry("74").unwrap_err().to_string();
        assert!(e.contains("expected 3 fields") && e.contains("\"74\""), "{e}");
        assert!(parse_telemetry("74, [N/A], 100").is_err());
        assert!(parse_telemetry("74, 1, -5").is_err());
    }

    #[test]
    fn policy_examples() {
        let p = ThermalPolicy::default();
        assert_eq!(evaluate_policy(&at(74.0), &p), Action::NoAction);
        assert_eq!(evaluate_policy(&at(76.0), &p), Action::WarnPause { duration_s: 30.0 });
        assert_eq!(evaluate_policy(&at(75.0), &p), Action::WarnPause { duration_s: 30.0 });
        assert_eq!(evaluate_policy(&at(85.0), &p), Action::CriticalPause { duration_s: 120.0 });
        assert_eq!(evaluate_policy(&at(84.99), &p), Action::WarnPause { duration_s: 30.0 });
    }

    #[test]
    fn gates() {
        let p = ThermalPolicy::default();
        assert_eq!(step_gate(10, &p), StepGate { poll: true, checkpoint: false });
        assert_eq!(step_gate(50, &p), StepGate { poll: true, checkpoint: true });
        assert_eq!(step_gate(7, &p), StepGate { poll: false, checkpoint: false });
    }

    #[test]
    fn chunks() {
        assert_eq!(chunk_sizes(12, 5), vec![5, 5, 2]);
        assert_eq!(chunk_sizes(5, 5), vec![5]);
        assert_eq!(chunk_sizes(1, 5), vec![1]);
        assert_eq!(chunk_sizes(10, 5), vec![5, 5]);
    }

    #[test]
    fn policy_json() {
        let p = ThermalPolicy::from_json(r#"{"warn_c": 70}"#).unwrap();
        assert_eq!(p.warn_c, 70.0);
        assert_eq!(p.critical_c, 85.0);
        assert!(ThermalPolicy::from_json(r#"{"warn_c": 90}"#).is_err());
        assert!(ThermalPolicy::from_json(r#"{"warn": 70}"#).is_err());
        assert!(ThermalPolicy::from_json(r#"{"poll_every_steps": 0}"#).is_err());
    }
}
