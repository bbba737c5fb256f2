use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
seed = 3
ppo.batch_size = 400
ppo.minibatch_size = 200
ppo.epochs = 2
ppo.workers = 1
ppo.hidden = 16, 8
ppo.checkpoint_interval = 1
env.perturbation.enabled = false
sweep.magnitudes = 50, 400
sweep.repetitions = 1
endurance.magnitudes = 0
endurance.durations = 0.2
endurance.links = base, arm
endurance.episodes = 2
endurance.cap = 7
";

fn pushrec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pushrec"))
        .args(args)
        .current_dir(dir)
        .env_remove("PUSHREC_OUT_DIR")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn help_lists_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&pushrec(dir.path(), &["--help"]));
    for cmd in ["train", "eval-polar", "eval-endurance", "record", "replay", "plot"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "ppo.clip = -3\n").unwrap();
    let out = pushrec(dir.path(), &["train", "--config", "bad.cfg", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ppo.clip"));

    std::fs::write(dir.path().join("typo.cfg"), "ppo.clipp = 0.2\n").unwrap();
    let out = pushrec(dir.path(), &["train", "--config", "typo.cfg", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ppo.clipp"));
}

#[test]
fn missing_checkpoint_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = pushrec(dir.path(), &["eval-polar", "--checkpoint", "nope/ckpt_000001.bin"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn train_resume_evaluate_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.cfg"), SMALL).unwrap();
    ok(&pushrec(d, &["train", "--config", "small.cfg", "--out", "run", "--steps", "400"]));
    let resumed = ok(&pushrec(d, &["train", "--config", "small.cfg", "--out", "run", "--steps", "800"]));
    assert!(resumed.contains("resuming from"));
    let metrics = std::fs::read_to_string(d.join("run/metrics.csv")).unwrap();
    let rows = metrics.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 3, "header plus one row per iteration:\n{metrics}");
    assert!(d.join("run/run.cfg").exists());

    let ckpt = "run/checkpoints/ckpt_000002.bin";
    assert!(d.join(ckpt).exists());
    ok(&pushrec(d, &["eval-polar", "--checkpoint", ckpt, "--plot"]));
    let sweep = std::fs::read_to_string(d.join("run/sweep.csv")).unwrap();
    assert!(sweep.contains("# protocol = polar"));
    assert_eq!(sweep.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 2);
    assert!(std::fs::read_to_string(d.join("run/sweep.svg")).unwrap().starts_with("<svg"));

    ok(&pushrec(d, &["eval-polar", "--checkpoint", ckpt, "--friction", "0.2"]));
    assert!(d.join("run/sweep_mu0.2.csv").exists());

    ok(&pushrec(d, &["eval-endurance", "--checkpoint", ckpt, "--episodes", "1"]));
    let endurance = std::fs::read_to_string(d.join("run/endurance.csv")).unwrap();
    assert_eq!(endurance.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2);

    ok(&pushrec(d, &["plot", "run/endurance.csv", "--out", "e.svg"]));
    assert!(d.join("e.svg").exists());
}

#[test]
fn record_and_verify_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&pushrec(
        d,
        &["record", "--seed", "4", "--duration", "2", "--push", "0.5,0.2,0,80", "--out", "."],
    ));
    let verified = ok(&pushrec(d, &["replay", "trace_4.jsonl", "--verify"]));
    assert!(verified.contains("0 mismatches"), "{verified}");
    let table = ok(&pushrec(d, &["replay", "trace_4.jsonl"]));
    assert!(table.lines().count() > 10);

    let out = pushrec(d, &["record", "--push", "1,2", "--out", "."]);
    assert_eq!(out.status.code(), Some(2));
}
