//! Per-iteration training metrics and their CSV log.

use std::fmt::Write as _;
use std::path::Path;

use crate::env::reward::TERM_NAMES;
use crate::fsutil::{write_atomic, TOOL_VERSION};

use super::PpoError;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    /// 1-based index of the finished iteration.
    pub iteration: u64,
    pub global_step: u64,
    pub batch_steps: usize,
    /// Mean reward per step.
    pub mean_reward: f64,
    /// Mean undiscounted reward per finished episode.
    pub mean_episode_return: f64,
    pub mean_episode_s: f64,
    pub episodes: usize,
    pub failures: usize,
    /// Mean contribution per step of each reward term, in `TERM_NAMES` order.
    pub term_means: Vec<f64>,
    pub kl: f64,
    pub clip_fraction: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub kl_coeff: f64,
    pub action_std: f64,
    pub divergences: usize,
    pub wall_s: f64,
}

impl IterationStats {
    pub fn csv_header() -> String {
        let mut cols = vec![
            "iteration",
            "global_step",
            "batch_steps",
            "mean_reward",
            "mean_episode_return",
            "mean_episode_s",
            "episodes",
            "failures",
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        cols.extend(TERM_NAMES.iter().map(|t| format!("term_{t}")));
        cols.extend(
            [
                "kl",
                "clip_fraction",
                "policy_loss",
                "value_loss",
                "entropy",
                "kl_coeff",
                "action_std",
                "divergences",
                "wall_s",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut s = format!(
            "{},{},{},{},{},{},{},{}",
            self.iteration, self.global_step, self.batch_steps, self.mean_reward, self.mean_episode_return, self.mean_episode_s, self.episodes, self.failures
        );
        for t in &self.term_means {
            let _ = write!(s, ",{t}");
        }
        let _ = write!(
            s,
            ",{},{},{},{},{},{},{},{},{:.3}",
            self.kl, self.clip_fraction, self.policy_loss, self.value_loss, self.entropy, self.kl_coeff, self.action_std, self.divergences, self.wall_s
        );
        s
    }
}

/// CSV rows keyed by iteration. The whole file is rewritten atomically after
/// every iteration; on resume, rows past the checkpoint are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    preamble: String,
    rows: Vec<(u64, String)>,
}

impl MetricsLog {
    pub fn new(config_hash: &str, seed: u64) -> Self {
        MetricsLog {
            preamble: format!(
                "# {TOOL_VERSION}\n# config_hash = {config_hash}\n# seed = {seed}\n{}\n",
                IterationStats::csv_header()
            ),
            rows: Vec::new(),
        }
    }

    /// Loads rows of an existing log up to and including `through`.
    pub fn resume(path: &Path, config_hash: &str, seed: u64, through: u64) -> Self {
        let mut log = Self::new(config_hash, seed);
        if let Ok(text) = std::fs::read_to_string(path) {
            for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("iteration")) {
                let Some(it) = line.split(',').next().and_then(|f| f.parse::<u64>().ok()) else {
                    continue;
                };
                if it <= through {
                    log.rows.push((it, line.to_string()));
                }
            }
        }
        log
    }

    pub fn push(&mut self, stats: &IterationStats) {
        self.rows.retain(|(it, _)| *it < stats.iteration);
        self.rows.push((stats.iteration, stats.csv_row()));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = self.preamble.clone();
        for (_, r) in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), PpoError> {
        write_atomic(path, self.to_text().as_bytes()).map_err(|e| PpoError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Reads the numeric columns of a metrics CSV as `(header, rows)`.
pub fn read_metrics_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().map(|h| h.split(',').map(String::from).collect()).unwrap_or_default();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|f| f.parse::<f64>().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(iteration: u64) -> IterationStats {
        IterationStats {
            iteration,
            global_step: iteration * 100,
            batch_steps: 100,
            mean_reward: 1.5,
            mean_episode_return: 30.0,
            mean_episode_s: 2.0,
            episodes: 3,
            failures: 1,
            term_means: vec![0.1; TERM_NAMES.len()],
            kl: 0.01,
            clip_fraction: 0.2,
            policy_loss: -0.1,
            value_loss: 0.5,
            entropy: 1.0,
            kl_coeff: 0.2,
            action_std: 0.3,
            divergences: 0,
            wall_s: 1.25,
        }
    }

    #[test]
    fn header_and_rows_have_equal_width() {
        let h = IterationStats::csv_header().split(',').count();
        assert_eq!(stats(1).csv_row().split(',').count(), h);
    }

    #[test]
    fn resume_drops_rows_past_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let mut log = MetricsLog::new("abc", 1);
        for i in 1..=5 {
            log.push(&stats(i));
        }
        log.write(&path).unwrap();
        let mut resumed = MetricsLog::resume(&path, "abc", 1, 3);
        assert_eq!(resumed.len(), 3);
        resumed.push(&stats(4));
        let (header, rows) = read_metrics_csv(&resumed.to_text());
        assert_eq!(header[0], "iteration");
        assert_eq!(rows.iter().map(|r| r[0] as u64).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    }
}
