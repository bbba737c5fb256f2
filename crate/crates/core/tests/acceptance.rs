//! Acceptance criteria, one test per criterion. Each prints a PASS/FAIL line
//! regardless of output capture.

use std::f64::consts::PI;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pushrec::dynamics::centroidal::{centroidal, CentroidalQuantities, FootSupport, SupportGeometry};
use pushrec::dynamics::integrator::{step, ExternalForce};
use pushrec::dynamics::kinematics::{kinetic_energy, Kinematics};
use pushrec::dynamics::model::{build_model, ContactParams, Joint, Link, ModelConfig, PidGains, RobotModel, Side, Vec2};
use pushrec::dynamics::state::{SimState, PHYSICS_DT};
use pushrec::env::kernel::{gamma, rbf_kernel};
use pushrec::env::reward::{evaluate, RewardInputs, RewardSpec};
use pushrec::env::{EnvConfig, ForceEvent};
use pushrec::eval::{endurance_eval, polar_sweep, EnduranceConfig, HoldPolicy, SweepConfig};
use pushrec::neural::gradcheck::{check_gradients, random_probe};
use pushrec::neural::ActorCritic;
use pushrec::ppo::{compute_advantages, IterationStats, PpoConfig, SegmentEnd, TrainSetup, Trainer};

fn report(n: u32, title: &str, ok: bool, detail: &str, started: Instant) {
    let line = format!(
        "{} criterion {n}: {title} ({detail}; {:.1} s)\n",
        if ok { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    // Bypasses the test harness capture so the line always shows.
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_01_rbf_kernel_exactness() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_peak: f64 = 0.0;
    let mut worst_cutoff: f64 = 0.0;
    for _ in 0..1000 {
        let dim = rng.random_range(1..=4);
        let cutoff = 10f64.powf(rng.random_range(-2.0..1.0));
        let eps = rng.random_range(1e-6..0.99);
        let target: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-9);
        let x: Vec<f64> = target.iter().zip(&dir).map(|(c, d)| c + cutoff * d / norm).collect();
        assert!(gamma(cutoff, eps) > 0.0);
        worst_peak = worst_peak.max((rbf_kernel(&target, &target, cutoff, eps) - 1.0).abs());
        worst_cutoff = worst_cutoff.max((rbf_kernel(&x, &target, cutoff, eps) - eps).abs());
    }
    let ok = worst_peak <= 1e-12 && worst_cutoff <= 1e-12;
    report(
        1,
        "RBF kernel exactness",
        ok,
        &format!("max |K(x*,x*)-1| = {worst_peak:.1e}, max |K(x_c)-eps| = {worst_cutoff:.1e}"),
        t,
    );
}

fn double_pendulum() -> RobotModel {
    let rod = |name: &str, parent, offset| Link {
        name: name.to_string(),
        parent,
        joint_offset: offset,
        com: Vec2::new(0.0, -0.5),
        mass: 1.0,
        inertia: 1.0 / 12.0,
        length: 1.0,
        probes: vec![],
        is_foot: false,
    };
    let anchor = Link {
        name: "anchor".into(),
        parent: None,
        joint_offset: Vec2::zeros(),
        com: Vec2::zeros(),
        mass: 1.0,
        inertia: 1.0,
        length: 0.0,
        probes: vec![],
        is_foot: false,
    };
    let joint = |name: &str, link| Joint {
        name: name.to_string(),
        link,
        lower: -10.0,
        upper: 10.0,
        velocity_limit: 100.0,
        gains: PidGains { kp: 0.0, ki: 0.0, kd: 0.0 },
    };
    let mut m = RobotModel::from_parts(
        vec![anchor, rod("upper", Some(0), Vec2::zeros()), rod("lower", Some(1), Vec2::new(0.0, -1.0))],
        vec![joint("j1", 1), joint("j2", 2)],
        vec![],
        9.81,
        ContactParams::default(),
        vec![0.0, 0.0],
    )
    .unwrap();
    m.fixed_base = true;
    m
}

#[test]
fn criterion_02_dynamics_conservation() {
    let t = Instant::now();
    let mut model = build_model(&ModelConfig::default()).unwrap();
    for j in &mut model.joints {
        j.gains = PidGains { kp: 0.0, ki: 0.0, kd: 0.0 };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_momentum: f64 = 0.0;
    let mut samples = 0;
    while samples < 20 {
        let joints: Vec<f64> = (0..model.n_joints()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut s = SimState::new(&model, [0.0, 30.0, rng.random_range(-1.0..1.0)], &joints);
        s.v = (0..model.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h0 = centroidal(&model, &s.q, &s.v).angular;
        // The relative measure is meaningless for a nearly spin-free state.
        if h0.abs() < 0.5 {
            continue;
        }
        samples += 1;
        for _ in 0..500 {
            step(&model, &mut s, &[]).unwrap();
            let h = centroidal(&model, &s.q, &s.v).angular;
            worst_momentum = worst_momentum.max((h - h0).abs() / h0.abs());
        }
    }

    let pendulum = double_pendulum();
    let mut s = SimState::new(&pendulum, [0.0, 0.0, 0.0], &[1.2, -0.5]);
    let floor = -pendulum.gravity * 2.0;
    let energy = |s: &SimState| kinetic_energy(&pendulum, &s.q, &s.v) + Kinematics::compute(&pendulum, &s.q, &s.v).potential_energy(&pendulum) - floor;
    let e0 = energy(&s);
    let mut worst_energy: f64 = 0.0;
    let steps = (10.0 / PHYSICS_DT).round() as usize;
    for _ in 0..steps {
        step(&pendulum, &mut s, &[]).unwrap();
        worst_energy = worst_energy.max((energy(&s) - e0).abs() / e0);
    }
    let ok = worst_momentum < 1e-3 && worst_energy < 0.02;
    report(
        2,
        "dynamics conservation",
        ok,
        &format!(
            "angular momentum drift {worst_momentum:.2e} over 0.5 s (20 states), energy drift {:.3}% over 10 s",
            worst_energy * 100.0
        ),
        t,
    );
}

#[test]
fn criterion_03_gradient_fidelity() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = ActorCritic::new(28, 8, &[128, 64], 0.3, &mut rng);
    let mut errors = Vec::new();
    let mut checked = Vec::new();
    for mlp in [&net.policy.mean, &net.value] {
        let (x, w) = random_probe(mlp, 4, &mut rng);
        let r = check_gradients(mlp, x.view(), w.view(), 100, 1e-5, &mut rng);
        errors.push(r.max_relative_error);
        checked.push(r.checked);
    }
    let ok = errors.iter().all(|e| *e < 1e-4) && checked.iter().all(|c| *c >= 100);
    report(
        3,
        "gradient fidelity",
        ok,
        &format!(
            "policy {} coords max rel err {:.1e}, value {} coords max rel err {:.1e}",
            checked[0], errors[0], checked[1], errors[1]
        ),
        t,
    );
}

#[test]
fn criterion_04_gae_oracle() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rewards = Vec::new();
    let mut ends = Vec::new();
    let mut lengths = Vec::new();
    for _ in 0..100 {
        let len = rng.random_range(1..=250);
        lengths.push(len);
        for k in 0..len {
            rewards.push(rng.random_range(-10.0..90.0));
            ends.push(if k + 1 == len { SegmentEnd::Failure } else { SegmentEnd::Continue });
        }
    }
    let g = 0.95;
    let values = vec![0.0; rewards.len()];
    let (adv, _) = compute_advantages(&rewards, &values, &ends, g, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut offset = 0;
    for len in lengths {
        let ep = &rewards[offset..offset + len];
        for i in 0..len {
            let brute: f64 = ep[i..].iter().enumerate().map(|(k, r)| g.powi(k as i32) * r).sum();
            worst = worst.max((adv[offset + i] - brute).abs() / brute.abs().max(1.0));
        }
        offset += len;
    }
    report(
        4,
        "GAE oracle",
        worst <= 1e-10,
        &format!("max relative deviation {worst:.1e} over 100 episodes"),
        t,
    );
}

fn foot(side: Side, force: f64, center: f64) -> FootSupport {
    FootSupport {
        side,
        in_contact: force > 0.0,
        vertical_force: force,
        cop: (force > 0.0).then_some(center),
        sole_center: center,
    }
}

#[test]
fn criterion_05_reward_composition() {
    let t = Instant::now();
    let model = build_model(&ModelConfig::default()).unwrap();
    let weight = model.weight();
    let at_target = RewardInputs {
        joints: model.home.clone(),
        home: model.home.clone(),
        action: vec![0.0; model.n_joints()],
        mean_torque: 0.0,
        centroidal: CentroidalQuantities {
            com: Vec2::new(0.02, 0.6),
            com_velocity: Vec2::zeros(),
            linear: Vec2::zeros(),
            angular: 0.0,
        },
        support: SupportGeometry {
            left: foot(Side::Left, weight / 2.0, 0.02),
            right: foot(Side::Right, weight / 2.0, 0.02),
            interval: Some((-0.08, 0.12)),
        },
        foot_angles: [0.0, 0.0],
        weight,
        gravity: model.gravity,
        non_foot_contact: false,
    };
    let spec = RewardSpec::default();
    let r = evaluate(&at_target, &spec);

    let mut fallen = at_target.clone();
    fallen.non_foot_contact = true;
    let f = evaluate(&fallen, &spec);
    let penalty = f.get("links_in_contact").map(|v| v.contribution).unwrap_or(f64::NAN);

    // A robot lying flat, pelvis and torso slightly in the ground.
    let lying = SimState::new(&model, [0.0, -0.005, PI / 2.0], &model.home);
    let from_state = RewardInputs::from_state(&model, &lying, &vec![0.0; model.n_joints()], &[]);
    let lying_penalty = evaluate(&from_state, &spec);

    let ok = r.total == 88.0
        && spec.max_reward() == 88.0
        && r.double_support
        && !r.terminal
        && penalty == -10.0
        && f.terminal
        && from_state.non_foot_contact
        && lying_penalty.terminal;
    report(
        5,
        "reward composition",
        ok,
        &format!("at-target total {}, max {}, non-foot contact term {penalty}", r.total, spec.max_reward()),
        t,
    );
}

#[test]
fn criterion_06_perturbation_impulse() {
    let t = Instant::now();
    let model = build_model(&ModelConfig::default()).unwrap();
    let push = ForceEvent::new(0.0, 0.2, 0.0, 200.0, 0);
    let normalized = push.normalized_impulse(model.total_mass);

    // Same push on the lifted robot: the CoM velocity change matches.
    let lifted = |force: bool| {
        let mut s = SimState::new(&model, [0.0, 30.0, 0.0], &model.home);
        let ext: Vec<ExternalForce> = if force { vec![push.external()] } else { vec![] };
        for _ in 0..push.duration_ticks {
            step(&model, &mut s, &ext).unwrap();
        }
        centroidal(&model, &s.q, &s.v).com_velocity.x
    };
    let dv = lifted(true) - lifted(false);
    let ok = (model.total_mass - 33.0).abs() < 1e-9 && (normalized - 1.21).abs() <= 0.0121 && (dv - 1.21).abs() <= 0.0121;
    report(
        6,
        "perturbation impulse",
        ok,
        &format!("200 N x 0.2 s / {} kg = {normalized:.4} N s/kg; simulated CoM dv {dv:.4} m/s", model.total_mass),
        t,
    );
}

struct Balance {
    stats: Vec<IterationStats>,
    trainer: Trainer,
}

fn balance_setup(seed: u64) -> TrainSetup {
    let mut env = EnvConfig::default();
    env.perturbation.enabled = false;
    TrainSetup {
        model_config: ModelConfig::default(),
        env_config: env,
        ppo: PpoConfig {
            workers: 4,
            ..PpoConfig::default()
        },
        seed,
    }
}

fn train_balance(seed: u64) -> Balance {
    let mut trainer = Trainer::new(balance_setup(seed)).unwrap();
    let mut stats = Vec::new();
    while trainer.global_step < 200_000 {
        stats.push(trainer.iterate().unwrap());
    }
    Balance { stats, trainer }
}

/// The seed-0 balance run, shared by the smoke-training and push-recovery
/// criteria.
fn balance_seed0() -> &'static Balance {
    static RUN: OnceLock<Balance> = OnceLock::new();
    RUN.get_or_init(|| train_balance(0))
}

fn mean_of(stats: &[IterationStats], f: impl Fn(&IterationStats) -> f64) -> f64 {
    stats.iter().map(f).sum::<f64>() / stats.len() as f64
}

#[test]
fn criterion_07_smoke_training() {
    let t = Instant::now();
    let run = balance_seed0();
    let n = run.stats.len();
    let tenth = (n / 10).max(1);
    let quarter = (n / 4).max(1);
    let first_s = mean_of(&run.stats[..tenth], |s| s.mean_episode_s);
    let last_s = mean_of(&run.stats[n - tenth..], |s| s.mean_episode_s);
    let first_r = mean_of(&run.stats[..quarter], |s| s.mean_reward);
    let last_r = mean_of(&run.stats[n - quarter..], |s| s.mean_reward);
    let ratio = last_s / first_s;
    let ok = ratio >= 3.0 && last_r > first_r;
    report(
        7,
        "smoke training",
        ok,
        &format!(
            "{n} iterations, {} steps; episode duration {first_s:.2} s -> {last_s:.2} s (x{ratio:.2}); reward per step {first_r:.2} -> {last_r:.2}",
            run.trainer.global_step
        ),
        t,
    );
}

fn push_recovery(mut trainer: Trainer) -> (usize, usize) {
    trainer.setup.env_config.perturbation.enabled = true;
    trainer.setup.env_config.perturbation.magnitude = 100.0;
    trainer.setup.env_config.perturbation.duration = 0.2;
    trainer.setup.env_config.perturbation.period = 5.0;
    let target = trainer.global_step + 300_000;
    while trainer.global_step < target {
        trainer.iterate().unwrap();
    }
    let sweep = SweepConfig::default();
    let trained = SweepConfig {
        magnitudes: sweep.magnitudes.iter().copied().filter(|m| *m <= 100.0).collect(),
        ..sweep
    };
    let r = polar_sweep(&trainer.net.policy, &trainer.setup.model_config, &trainer.setup.env_config, &trained, 4).unwrap();
    (r.cells.iter().map(|c| c.successes).sum(), trained.episodes())
}

#[test]
fn criterion_08_push_recovery() {
    let t = Instant::now();
    let mut attempts = Vec::new();
    // Expected-flaky: up to two retries with fresh seeds.
    for seed in 0..3u64 {
        let trainer = if seed == 0 {
            let b = balance_seed0();
            Trainer::from_checkpoint(b.trainer.setup.clone(), b.trainer.checkpoint(), false).unwrap()
        } else {
            train_balance(seed).trainer
        };
        let (ok, total) = push_recovery(trainer);
        attempts.push(format!("seed {seed}: {ok}/{total}"));
        if ok as f64 >= 0.8 * total as f64 {
            report(
                8,
                "push-recovery smoke",
                true,
                &format!("sweep over trained magnitudes <= 100 N; {}", attempts.join(", ")),
                t,
            );
            return;
        }
    }
    report(
        8,
        "push-recovery smoke",
        false,
        &format!("below 80% on every attempt; {}", attempts.join(", ")),
        t,
    );
}

const PIPELINE_CFG: &str = "\
seed = 5
steps = 6000
ppo.batch_size = 2000
ppo.minibatch_size = 256
ppo.epochs = 4
ppo.workers = 1
ppo.checkpoint_interval = 2
sweep.magnitudes = 50, 300
sweep.repetitions = 2
endurance.magnitudes = 150
endurance.durations = 0.2
endurance.links = base
endurance.episodes = 2
endurance.cap = 9
";

fn pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("pipeline.cfg"), PIPELINE_CFG).unwrap();
    let bin = env!("CARGO_BIN_EXE_pushrec");
    let run = |args: &[&str]| {
        let out = Command::new(bin).args(args).current_dir(dir).env_remove("PUSHREC_OUT_DIR").output().unwrap();
        assert!(out.status.success(), "pushrec {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["train", "--config", "pipeline.cfg", "--out", "."]);
    let latest = pushrec::ppo::latest_checkpoint(dir).unwrap();
    let rel = latest.strip_prefix(dir).unwrap().to_str().unwrap().to_string();
    run(&["eval-polar", "--checkpoint", &rel]);
    run(&["eval-endurance", "--checkpoint", &rel]);

    let mut files = Vec::new();
    let mut names: Vec<_> = std::fs::read_dir(dir.join("checkpoints")).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    names.push(dir.join("sweep.csv"));
    names.push(dir.join("endurance.csv"));
    for p in names {
        let name = p.strip_prefix(dir).unwrap().display().to_string();
        files.push((name, std::fs::read(&p).unwrap()));
    }
    files
}

#[test]
fn criterion_09_determinism() {
    let t = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let a = pipeline(&tmp.path().join("a"));
    let b = pipeline(&tmp.path().join("b"));
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let same_names = names == b.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>();
    let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    let has_checkpoint = names.iter().any(|n| n.ends_with(".bin"));
    let ok = same_names && differing.is_empty() && has_checkpoint;
    report(
        9,
        "determinism",
        ok,
        &format!("{} files compared ({}); differing: {:?}", names.len(), names.join(", "), differing),
        t,
    );
}

#[test]
fn criterion_10_protocol_fidelity() {
    let t = Instant::now();
    let model = ModelConfig::default();
    let env = EnvConfig::default();
    let hold = HoldPolicy { joints: 8 };
    let sweep = SweepConfig::default();
    let r = polar_sweep(&hold, &model, &env, &sweep, 4).unwrap();
    let expected_mags = ((700.0 - 50.0) / 25.0) as usize + 1;
    let mut per_direction = Vec::new();
    for &d in &sweep.directions {
        let mut mags: Vec<f64> = r.cells.iter().filter(|c| c.direction == d).map(|c| c.magnitude).collect();
        mags.dedup();
        per_direction.push(mags.len());
    }
    let grid_ok = per_direction.iter().all(|n| *n == expected_mags)
        && r.cells.len() == expected_mags * sweep.directions.len()
        && r.cells.iter().all(|c| c.repetitions == 5)
        && r.cells.first().map(|c| c.magnitude) == Some(50.0)
        && r.cells.last().map(|c| c.magnitude) == Some(700.0);

    let endurance = EnduranceConfig {
        magnitudes: vec![0.0],
        durations: vec![0.2],
        links: vec!["base".into()],
        ..EnduranceConfig::default()
    };
    let e = endurance_eval(&hold, &model, &env, &endurance, 4).unwrap();
    let apps = e.cells[0].mean_applications();
    let nominal = endurance.cap / endurance.period;
    let apps_ok = (apps - nominal).abs() <= 0.15 * nominal;
    report(
        10,
        "protocol fidelity",
        grid_ok && apps_ok,
        &format!(
            "{expected_mags} magnitudes per direction ({per_direction:?}), {} cells x 5 reps = {} episodes; zero-magnitude endurance {apps:.2} applications per {} s episode over {} episodes",
            r.cells.len(),
            r.cells.iter().map(|c| c.repetitions).sum::<usize>(),
            endurance.cap,
            endurance.episodes
        ),
        t,
    );
}
