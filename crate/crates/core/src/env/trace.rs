//! Episode traces as JSON lines.
//!
//! The first line is a [`TraceHeader`] carrying everything needed to rebuild
//! the episode (model and episode configuration text, episode seed, scripted
//! pushes). Every following line is a [`StepRecord`] holding the state at the
//! end of the control step. Floats are written in shortest round-trip form,
//! so a re-simulated episode can be compared bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::model::ModelConfig;
use crate::fsutil::{config_hash, TOOL_VERSION};

use super::{Env, EnvConfig, EnvError, ForceEvent, StepOutcome};

pub const TRACE_FORMAT: &str = "pushrec-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub start_tick: u64,
    pub duration_ticks: u64,
    pub direction: f64,
    pub magnitude: f64,
    pub link: usize,
}

impl From<ForceEvent> for EventRecord {
    fn from(e: ForceEvent) -> Self {
        EventRecord {
            start_tick: e.start_tick,
            duration_ticks: e.duration_ticks,
            direction: e.direction,
            magnitude: e.magnitude,
            link: e.link,
        }
    }
}

impl From<EventRecord> for ForceEvent {
    fn from(e: EventRecord) -> Self {
        ForceEvent {
            start_tick: e.start_tick,
            duration_ticks: e.duration_ticks,
            direction: e.direction,
            magnitude: e.magnitude,
            link: e.link,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub tool: String,
    pub config_hash: String,
    pub episode_seed: u64,
    pub model_config: String,
    pub env_config: String,
    pub scripted: Vec<EventRecord>,
}

impl TraceHeader {
    /// Header for the episode currently loaded in `env`.
    pub fn for_env(env: &Env) -> Self {
        let model_config = env.model_config().to_kv_string();
        let env_config = env.config().to_kv_string();
        TraceHeader {
            format: TRACE_FORMAT.to_string(),
            version: TRACE_VERSION,
            tool: TOOL_VERSION.to_string(),
            config_hash: config_hash(&[&model_config, &env_config]),
            episode_seed: env.episode_seed(),
            model_config,
            env_config,
            scripted: env.scripted().iter().map(|&e| e.into()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub terms: BTreeMap<String, f64>,
    pub events: Vec<EventRecord>,
    pub done: bool,
    pub failure: bool,
}

impl StepRecord {
    pub fn new(env: &Env, action: &[f64], out: &StepOutcome) -> Self {
        let s = env.state();
        StepRecord {
            step: env.steps(),
            t: s.time(),
            q: s.q.clone(),
            v: s.v.clone(),
            action: action.to_vec(),
            reward: out.reward,
            terms: out.breakdown.terms.iter().map(|t| (t.name.to_string(), t.contribution)).collect(),
            events: out.started.iter().map(|&e| e.into()).collect(),
            done: out.done,
            failure: out.failure,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("trace is empty")]
    Empty,
    #[error(transparent)]
    Env(#[from] EnvError),
}

impl Trace {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", serde_json::to_string(&self.header).expect("header serializes"));
        for r in &self.steps {
            let _ = writeln!(out, "{}", serde_json::to_string(r).expect("record serializes"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (idx, first) = lines.next().ok_or(TraceError::Empty)?;
        let header: TraceHeader = serde_json::from_str(first).map_err(|e| TraceError::Parse {
            line: idx + 1,
            reason: format!("bad header: {e}"),
        })?;
        if header.format != TRACE_FORMAT || header.version != TRACE_VERSION {
            return Err(TraceError::Parse {
                line: idx + 1,
                reason: format!("unsupported trace format {} v{}", header.format, header.version),
            });
        }
        let mut steps = Vec::new();
        for (idx, line) in lines {
            let r: StepRecord = serde_json::from_str(line).map_err(|e| TraceError::Parse {
                line: idx + 1,
                reason: e.to_string(),
            })?;
            steps.push(r);
        }
        Ok(Trace { header, steps })
    }
}

/// Records one episode. `policy` maps observations to actions.
pub fn record_episode(env: &mut Env, episode_seed: u64, mut policy: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Trace, EnvError> {
    let mut obs = env.reset_with_seed(episode_seed);
    let header = TraceHeader::for_env(env);
    let mut steps = Vec::new();
    loop {
        let action = policy(&obs);
        let out = env.step(&action)?;
        steps.push(StepRecord::new(env, &action, &out));
        if out.done {
            break;
        }
        obs = out.observation;
    }
    Ok(Trace { header, steps })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub steps: usize,
    pub mismatches: usize,
    pub first_divergent: Option<usize>,
}

/// Re-simulates the trace from its header and recorded actions and compares
/// every step record.
pub fn verify(trace: &Trace) -> Result<VerifyReport, TraceError> {
    let parse_err = |reason: String| TraceError::Parse { line: 1, reason };
    let model_config = ModelConfig::parse(&trace.header.model_config).map_err(|e| parse_err(e.to_string()))?;
    let env_config = EnvConfig::parse(&trace.header.env_config).map_err(|e| parse_err(e.to_string()))?;
    let mut env = Env::new(model_config, env_config, 0)?;
    env.set_scripted(trace.header.scripted.iter().map(|&e| e.into()).collect());
    env.reset_with_seed(trace.header.episode_seed);
    let mut mismatches = 0;
    let mut first_divergent = None;
    for rec in &trace.steps {
        let ok = match env.step(&rec.action) {
            Ok(out) => StepRecord::new(&env, &rec.action, &out) == *rec,
            Err(_) => false,
        };
        if !ok {
            mismatches += 1;
            first_divergent.get_or_insert(rec.step);
        }
    }
    Ok(VerifyReport {
        steps: trace.steps.len(),
        mismatches,
        first_divergent,
    })
}
