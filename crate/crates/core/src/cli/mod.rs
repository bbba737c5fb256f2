//! Command-line front end.

pub mod run_config;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use run_config::RunConfig;

use crate::config::ConfigError;
use crate::env::trace::{self, Trace, TraceError};
use crate::env::{resolve_link, Env, EnvConfig, EnvError, ForceEvent};
use crate::eval::scenario::{run_scenario, HoldPolicy, Policy, Scenario};
use crate::eval::sweep::eval_env_config;
use crate::eval::{endurance_eval, polar_sweep, render_csv, CsvMeta, EvalError, PlotError};
use crate::fsutil::write_atomic;
use crate::neural::{Checkpoint, CheckpointError, GaussianPolicy};
use crate::ppo::{checkpoint_path, interface_hash, latest_checkpoint, train, PpoError, TrainSetup, Trainer};

pub const OUT_DIR_ENV: &str = "PUSHREC_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "pushrec-out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Train(#[from] PpoError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("cannot write {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("verification failed: {mismatches} of {steps} steps differ, first at step {first}")]
    Mismatch { steps: usize, mismatches: usize, first: usize },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for configuration and usage problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Train(PpoError::Config(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pushrec", version, about = "Planar biped push-recovery training and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train with PPO, resuming from the latest checkpoint in the output directory.
    Train(TrainArgs),
    /// Deterministic push sweep over directions and magnitudes.
    EvalPolar(EvalArgs),
    /// Consecutive random pushes per (link, magnitude, duration) cell.
    EvalEndurance(EvalArgs),
    /// Record one evaluation episode as a trace file.
    Record(RecordArgs),
    /// Print a trace, or re-simulate it with --verify.
    Replay(ReplayArgs),
    /// Render an evaluation CSV as an SVG heatmap.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory (default: run config `out_dir`, then $PUSHREC_OUT_DIR).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Total environment steps, counting steps of resumed runs.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Resume even when the checkpoint was trained with a different interface.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Ground friction coefficient override.
    #[arg(long)]
    pub friction: Option<f64>,
    /// Episodes per endurance cell.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Also write an SVG next to the CSV.
    #[arg(long)]
    pub plot: bool,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[command(flatten)]
    pub common: Common,
    /// Policy checkpoint; without it the robot holds its initial posture.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Episode length, s.
    #[arg(long, default_value_t = 7.0)]
    pub duration: f64,
    /// Scripted push `start,duration,direction,magnitude` (s, s, rad, N).
    #[arg(long)]
    pub push: Option<String>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub trace: PathBuf,
    /// Re-simulate from the recorded seed and compare every step.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    pub csv: PathBuf,
    /// SVG path (default: the CSV path with an .svg extension).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn load_run_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut c = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(ConfigError::invalid("workers", "must be >= 1").into());
        }
        c.ppo.workers = w;
    }
    Ok(c)
}

fn out_dir(common: &Common, cfg: &RunConfig, fallback: Option<&Path>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| fallback.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::EvalPolar(a) => cmd_eval_polar(&a),
        Command::EvalEndurance(a) => cmd_eval_endurance(&a),
        Command::Record(a) => cmd_record(&a),
        Command::Replay(a) => cmd_replay(&a),
        Command::Plot(a) => cmd_plot(&a),
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = load_run_config(&a.common)?;
    let out = out_dir(&a.common, &cfg, None);
    let steps = a.steps.unwrap_or(cfg.steps);
    std::fs::create_dir_all(out.join("checkpoints")).map_err(|e| CliError::Io {
        path: out.clone(),
        reason: e.to_string(),
    })?;
    let setup = TrainSetup {
        model_config: cfg.model.clone(),
        env_config: cfg.env.clone(),
        ppo: cfg.ppo.clone(),
        seed: a.common.seed.unwrap_or(cfg.seed),
    };
    let mut trainer = match latest_checkpoint(&out) {
        Some(path) => {
            let ckpt = Checkpoint::load(&path)?;
            if a.common.seed.is_some_and(|s| s != ckpt.seed) {
                log::warn!("resuming with the checkpoint seed {}", ckpt.seed);
            }
            println!("resuming from {} (step {})", path.display(), ckpt.global_step);
            Trainer::from_checkpoint(setup, ckpt, a.force)?
        }
        None => Trainer::new(setup)?,
    };
    let mut resolved = cfg.clone();
    resolved.seed = trainer.setup.seed;
    resolved.out_dir = None;
    write_file(&out.join("run.cfg"), resolved.to_kv_string().as_bytes())?;
    let done = train(&mut trainer, steps, &out, |s| {
        println!(
            "iter {:4}  step {:8}  reward {:7.2}  episode {:6.2} s  kl {:.4}  std {:.3}  {:.1} s",
            s.iteration, s.global_step, s.mean_reward, s.mean_episode_s, s.kl, s.action_std, s.wall_s
        );
    })?;
    println!(
        "trained {} iterations; step {}; latest checkpoint {}",
        done.len(),
        trainer.global_step,
        checkpoint_path(&out, trainer.iteration).display()
    );
    Ok(())
}

/// Run directory of a checkpoint at `<run>/checkpoints/ckpt_*.bin`.
fn run_dir_of(checkpoint: &Path) -> Option<PathBuf> {
    let parent = checkpoint.parent()?;
    (parent.file_name()? == "checkpoints").then(|| parent.parent().map(Path::to_path_buf)).flatten()
}

/// Settings for evaluating `checkpoint`: the explicit run config, else the
/// `run.cfg` written next to the training run, else defaults.
fn eval_settings(common: &Common, checkpoint: &Path) -> Result<RunConfig, CliError> {
    if common.config.is_none() {
        if let Some(run) = run_dir_of(checkpoint).map(|d| d.join("run.cfg")).filter(|p| p.exists()) {
            let mut c = RunConfig::load(&run)?;
            c.out_dir = None;
            if let Some(w) = common.workers {
                c.ppo.workers = w.max(1);
            }
            return Ok(c);
        }
    }
    load_run_config(common)
}

struct Loaded {
    cfg: RunConfig,
    ckpt: Checkpoint,
    out: PathBuf,
}

fn load_for_eval(common: &Common, checkpoint: &Path, force: bool) -> Result<Loaded, CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let cfg = eval_settings(common, checkpoint)?;
    ckpt.check_hash(&interface_hash(&cfg.model, &cfg.env, &cfg.ppo), force)?;
    let fallback = run_dir_of(checkpoint);
    let out = out_dir(common, &cfg, fallback.as_deref().or(Some(Path::new("."))));
    std::fs::create_dir_all(&out).map_err(|e| CliError::Io {
        path: out.clone(),
        reason: e.to_string(),
    })?;
    Ok(Loaded { cfg, ckpt, out })
}

fn meta(l: &Loaded, checkpoint: &Path, seed: u64, extra: Vec<(String, String)>) -> CsvMeta {
    let mut all = vec![
        ("checkpoint".to_string(), checkpoint.display().to_string()),
        ("global_step".to_string(), l.ckpt.global_step.to_string()),
    ];
    all.extend(extra);
    CsvMeta {
        config_hash: l.ckpt.config_hash.clone(),
        seed,
        extra: all,
    }
}

fn write_csv(path: &Path, csv: &str, plot: bool) -> Result<(), CliError> {
    write_file(path, csv.as_bytes())?;
    println!("wrote {}", path.display());
    if plot {
        let svg_path = path.with_extension("svg");
        write_file(&svg_path, render_csv(csv)?.as_bytes())?;
        println!("wrote {}", svg_path.display());
    }
    Ok(())
}

pub fn cmd_eval_polar(a: &EvalArgs) -> Result<(), CliError> {
    let l = load_for_eval(&a.common, &a.checkpoint, a.force)?;
    let mut sweep = l.cfg.sweep.clone();
    if let Some(s) = a.common.seed {
        sweep.seed = s;
    }
    if let Some(mu) = a.friction {
        if !(mu > 0.0) {
            return Err(ConfigError::invalid("friction", "must be > 0").into());
        }
        sweep.friction = Some(mu);
    }
    let result = polar_sweep(&l.ckpt.net.policy, &l.cfg.model, &l.cfg.env, &sweep, l.cfg.ppo.workers)?;
    let friction = sweep.friction.unwrap_or(l.cfg.model.contact.friction);
    let extra = vec![
        ("protocol".to_string(), "polar".to_string()),
        ("friction".to_string(), friction.to_string()),
        ("friction_override".to_string(), sweep.friction.is_some().to_string()),
        ("repetitions".to_string(), sweep.repetitions.to_string()),
    ];
    let name = match sweep.friction {
        Some(mu) => format!("sweep_mu{mu}.csv"),
        None => "sweep.csv".to_string(),
    };
    let total: usize = result.cells.iter().map(|c| c.successes).sum();
    println!("{} cells, {total}/{} episodes succeeded", result.cells.len(), sweep.episodes());
    write_csv(&l.out.join(name), &result.to_csv(&meta(&l, &a.checkpoint, sweep.seed, extra)), a.plot)
}

pub fn cmd_eval_endurance(a: &EvalArgs) -> Result<(), CliError> {
    let l = load_for_eval(&a.common, &a.checkpoint, a.force)?;
    let mut cfg = l.cfg.endurance.clone();
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.episodes {
        cfg.episodes = n;
    }
    let mut model = l.cfg.model.clone();
    if let Some(mu) = a.friction {
        if !(mu > 0.0) {
            return Err(ConfigError::invalid("friction", "must be > 0").into());
        }
        model.contact.friction = mu;
    }
    let result = endurance_eval(&l.ckpt.net.policy, &model, &l.cfg.env, &cfg, l.cfg.ppo.workers)?;
    for c in &result.cells {
        println!(
            "{:>6} {:6.1} N {:4.2} s: mean {:6.2} median {:5.1} max {:3} survived {}/{}",
            c.link,
            c.magnitude,
            c.duration,
            c.mean(),
            c.median(),
            c.max(),
            c.survived,
            c.counts.len()
        );
    }
    let extra = vec![
        ("protocol".to_string(), "endurance".to_string()),
        ("friction".to_string(), model.contact.friction.to_string()),
        ("period".to_string(), cfg.period.to_string()),
        ("cap".to_string(), cfg.cap.to_string()),
    ];
    write_csv(&l.out.join("endurance.csv"), &result.to_csv(&meta(&l, &a.checkpoint, cfg.seed, extra)), a.plot)
}

fn parse_push(text: &str, link: usize) -> Result<ForceEvent, CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--push expects start,duration,direction,magnitude; got {text:?}")))?;
    match parts[..] {
        [start, duration, direction, magnitude] if start >= 0.0 && duration > 0.0 => Ok(ForceEvent::new(start, duration, direction, magnitude, link)),
        _ => Err(CliError::Usage(format!("--push expects start,duration,direction,magnitude; got {text:?}"))),
    }
}

pub fn cmd_record(a: &RecordArgs) -> Result<(), CliError> {
    let (cfg, policy): (RunConfig, Box<dyn Policy>) = match &a.checkpoint {
        Some(p) => {
            let ckpt = Checkpoint::load(p)?;
            let cfg = eval_settings(&a.common, p)?;
            ckpt.check_hash(&interface_hash(&cfg.model, &cfg.env, &cfg.ppo), a.force)?;
            let policy: GaussianPolicy = ckpt.net.policy;
            (cfg, Box::new(policy))
        }
        None => {
            let cfg = load_run_config(&a.common)?;
            let joints = crate::dynamics::model::build_model(&cfg.model).map_err(EnvError::from)?.n_joints();
            (cfg, Box::new(HoldPolicy { joints }))
        }
    };
    if !(a.duration > 0.0) {
        return Err(ConfigError::invalid("duration", "must be > 0").into());
    }
    let env_cfg: EnvConfig = eval_env_config(&cfg.env, cfg.sweep.pose_sigma_deg, a.duration);
    let mut env = Env::new(cfg.model.clone(), env_cfg, 0)?;
    let scripted = match &a.push {
        Some(p) => vec![parse_push(p, resolve_link(env.nominal(), &cfg.sweep.link)?)?],
        None => Vec::new(),
    };
    let seed = a.common.seed.unwrap_or(cfg.seed);
    let scenario = Scenario {
        scripted,
        record_trace: true,
        ..Scenario::default()
    };
    let r = run_scenario(&mut env, policy.as_ref(), &scenario, |_| seed)?;
    let dir = out_dir(&a.common, &cfg, Some(Path::new(".")));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io {
        path: dir.clone(),
        reason: e.to_string(),
    })?;
    let out = dir.join(format!("trace_{seed}.jsonl"));
    let trace = r.trace.expect("trace requested");
    write_file(&out, trace.to_text().as_bytes())?;
    println!(
        "{} after {:.2} s ({} steps); wrote {}",
        if r.survived { "survived" } else { "fell" },
        r.survival_time,
        trace.steps.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_replay(a: &ReplayArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.trace).map_err(|e| CliError::Io {
        path: a.trace.clone(),
        reason: e.to_string(),
    })?;
    let t = Trace::parse(&text)?;
    if a.verify {
        let report = trace::verify(&t)?;
        if let Some(first) = report.first_divergent {
            return Err(CliError::Mismatch {
                steps: report.steps,
                mismatches: report.mismatches,
                first,
            });
        }
        println!("verified, 0 mismatches ({} steps)", report.steps);
        return Ok(());
    }
    let mut out = std::io::stdout().lock();
    // A closed pipe (e.g. `| head`) ends the listing quietly.
    let _ = print_table(&mut out, &t);
    Ok(())
}

fn print_table(out: &mut impl Write, t: &Trace) -> std::io::Result<()> {
    writeln!(
        out,
        "episode seed {}  config {}  {}",
        t.header.episode_seed, t.header.config_hash, t.header.tool
    )?;
    writeln!(out, "{:>5} {:>7} {:>8} {:>8} {:>8} {:>7}  events", "step", "t", "x", "z", "pitch", "reward")?;
    for s in &t.steps {
        let events: Vec<String> = s.events.iter().map(|e| format!("{:.0}N@{:.2}", e.magnitude, e.direction)).collect();
        let status = if s.failure {
            " FALL"
        } else if s.done {
            " END"
        } else {
            ""
        };
        writeln!(
            out,
            "{:>5} {:>7.3} {:>8.4} {:>8.4} {:>8.4} {:>7.2}  {}{status}",
            s.step,
            s.t,
            s.q[0],
            s.q[1],
            s.q[2],
            s.reward,
            events.join(" ")
        )?;
    }
    Ok(())
}

pub fn cmd_plot(a: &PlotArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.csv).map_err(|e| CliError::Io {
        path: a.csv.clone(),
        reason: e.to_string(),
    })?;
    let svg = render_csv(&text)?;
    let out = a.out.clone().unwrap_or_else(|| a.csv.with_extension("svg"));
    write_file(&out, svg.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}
