//! Evaluation protocols: scripted-push sweeps and random-push endurance.

pub mod endurance;
pub mod plot;
pub mod scenario;
pub mod sweep;

use std::fmt::Write as _;

pub use endurance::{endurance_eval, EnduranceCell, EnduranceConfig, EnduranceResult};
pub use plot::{render_csv, PlotError};
pub use scenario::{episode_seed, run_scenario, EpisodeResult, HoldPolicy, Policy, Scenario};
pub use sweep::{polar_sweep, trend_test, SweepCell, SweepConfig, SweepResult, TrendTest};

use crate::config::ConfigError;
use crate::env::EnvError;
use crate::fsutil::TOOL_VERSION;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Runs `jobs` independent jobs on up to `workers` threads. Job `i` goes to
/// thread `i mod workers`; results come back in job order.
pub fn run_jobs<T: Send>(jobs: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = workers.clamp(1, jobs.max(1));
    if workers == 1 {
        return (0..jobs).map(&f).collect();
    }
    let f = &f;
    let mut slots: Vec<Option<T>> = (0..jobs).map(|_| None).collect();
    let parts: Vec<Vec<(usize, T)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| s.spawn(move || (w..jobs).step_by(workers).map(|i| (i, f(i))).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
    });
    for (i, r) in parts.into_iter().flatten() {
        slots[i] = Some(r);
    }
    slots.into_iter().map(|s| s.expect("every job ran")).collect()
}

/// Comment lines that open every evaluation CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMeta {
    pub config_hash: String,
    pub seed: u64,
    pub extra: Vec<(String, String)>,
}

impl CsvMeta {
    pub fn preamble(&self) -> String {
        let mut s = format!("# {TOOL_VERSION}\n# config_hash = {}\n# seed = {}\n", self.config_hash, self.seed);
        for (k, v) in &self.extra {
            let _ = writeln!(s, "# {k} = {v}");
        }
        s
    }
}

/// `# key = value` metadata, header and rows of a CSV.
pub type CsvParts = (Vec<(String, String)>, Vec<String>, Vec<Vec<String>>);

/// Splits a CSV produced here into its `# key = value` metadata, header and
/// rows.
pub fn read_csv(text: &str) -> CsvParts {
    let mut meta = Vec::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else if line.trim().is_empty() {
            continue;
        } else if header.is_empty() {
            header = line.split(',').map(String::from).collect();
        } else {
            rows.push(line.split(',').map(String::from).collect());
        }
    }
    (meta, header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jobs_return_in_order() {
        let r = run_jobs(10, 3, |i| i * i);
        assert_eq!(r, (0..10).map(|i| i * i).collect::<Vec<_>>());
        assert!(run_jobs(0, 4, |i| i).is_empty());
    }

    #[test]
    fn csv_meta_round_trip() {
        let m = CsvMeta {
            config_hash: "ab".into(),
            seed: 3,
            extra: vec![("friction".into(), "0.2".into())],
        };
        let text = format!("{}a,b\n1,2\n", m.preamble());
        let (meta, header, rows) = read_csv(&text);
        assert!(meta.contains(&("friction".to_string(), "0.2".to_string())));
        assert_eq!(header, vec!["a", "b"]);
        assert_eq!(rows, vec![vec!["1".to_string(), "2".to_string()]]);
    }
}
