//! Newline-delimited JSON run files and their replay.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::SessionConfig;
use super::digest::to_hex;
use super::engine::{frames_digest, Engine, GazeEvent, Runner};
use crate::error::{DroemError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub version: u32,
    #[serde(flatten)]
    pub config: SessionConfig,
    pub initial_state: String,
    pub initial_frame: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub t: f64,
    /// Events applied at the start of this step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gaze: Vec<GazeEvent>,
    pub state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Complete,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFinal {
    pub steps: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub dropped_events: u64,
    pub state: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub header: RunHeader,
    pub steps: Vec<StepRecord>,
    pub final_line: Option<RunFinal>,
}

impl RunRecord {
    pub fn new(header: RunHeader) -> Self {
        RunRecord { header, steps: Vec::new(), final_line: None }
    }

    pub fn status(&self) -> Option<RunStatus> {
        self.final_line.as_ref().map(|f| f.status)
    }

    /// All events in application order.
    pub fn events(&self) -> impl Iterator<Item = &GazeEvent> {
        self.steps.iter().flat_map(|s| s.gaze.iter())
    }

    pub fn to_ndjson(&self) -> Result<String> {
        let mut out = serde_json::to_string(&serde_json::json!({ "header": self.header }))?;
        out.push('\n');
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s)?);
            out.push('\n');
        }
        if let Some(f) = &self.final_line {
            out.push_str(&serde_json::to_string(&serde_json::json!({ "final": f }))?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| DroemError::Parse("empty run file".into()))?;
        let mut v: Value = serde_json::from_str(first).map_err(|e| DroemError::Parse(format!("line 1: {e}")))?;
        let header: RunHeader = serde_json::from_value(v.get_mut("header").map(Value::take).ok_or_else(|| {
            DroemError::Parse("first line is not a header".into())
        })?)
        .map_err(|e| DroemError::Parse(format!("header: {e}")))?;
        if header.version != FORMAT_VERSION {
            return Err(DroemError::Parse(format!("unsupported run file version {}", header.version)));
        }
        let mut record = RunRecord::new(header);
        for (i, line) in lines {
            let lineno = i + 1;
            if record.final_line.is_some() {
                return Err(DroemError::Parse(format!("line {lineno}: content after the final line")));
            }
            let mut v: Value = serde_json::from_str(line).map_err(|e| DroemError::Parse(format!("line {lineno}: {e}")))?;
            if let Some(f) = v.get_mut("final") {
                record.final_line =
                    Some(serde_json::from_value(f.take()).map_err(|e| DroemError::Parse(format!("line {lineno}: {e}")))?);
            } else {
                record.steps.push(serde_json::from_value(v).map_err(|e| DroemError::Parse(format!("line {lineno}: {e}")))?);
            }
        }
        Ok(record)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ndjson()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    /// 0 for the header, otherwise the step number.
    pub step: u64,
    pub what: String,
    pub recorded: String,
    pub replayed: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub steps: u64,
    pub mismatches: Vec<Mismatch>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-runs the header's configuration with the recorded per-step events
/// and compares every digest.
pub fn replay(record: &RunRecord) -> Result<ReplayReport> {
    let mut mismatches = Vec::new();
    let mut check = |step: u64, what: &str, recorded: &str, replayed: String| {
        if recorded != replayed {
            mismatches.push(Mismatch { step, what: what.into(), recorded: recorded.into(), replayed });
        }
    };
    let engine = Engine::new(record.header.config.clone())?;
    check(0, "state", &record.header.initial_state, to_hex(engine.state_digest()));
    check(0, "frame", &record.header.initial_frame, to_hex(frames_digest(&engine.render_all()?)));
    let mut runner = Runner::new(record.header.config.clone())?;
    for s in &record.steps {
        for e in &s.gaze {
            runner.hold(e.clone())?;
        }
        let out = runner.step_once()?;
        check(s.step, "step", &s.step.to_string(), out.line.step.to_string());
        check(s.step, "state", &s.state, out.line.state);
        check(s.step, "frame", s.frame.as_deref().unwrap_or("-"), out.line.frame.unwrap_or_else(|| "-".into()));
    }
    let steps = record.steps.len() as u64;
    if let Some(f) = &record.final_line {
        if f.steps != steps {
            check(steps, "final step count", &f.steps.to_string(), steps.to_string());
        }
        let state: Vec<[f64; 2]> = runner.engine().state().phi.iter().map(|c| [c.re, c.im]).collect();
        let enc = |v: &[[f64; 2]]| serde_json::to_string(v).unwrap_or_default();
        check(steps, "final state", &enc(&f.state), enc(&state));
    }
    Ok(ReplayReport { steps, mismatches })
}
