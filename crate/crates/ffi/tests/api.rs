use std::ffi::{CStr, CString};
use std::ptr;

use pushrec::dynamics::model::ModelConfig;
use pushrec::env::{Env, EnvConfig};
use pushrec::ppo::{PpoConfig, TrainSetup, Trainer};
use pushrec_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe {
        pushrec_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn new_env(env_config: Option<&str>, seed: u64) -> (PushrecStatus, *mut PushrecEnv) {
    let text = env_config.map(|t| CString::new(t).unwrap());
    let mut h = ptr::null_mut();
    let s = unsafe { pushrec_env_new(ptr::null(), text.as_ref().map_or(ptr::null(), |c| c.as_ptr()), seed, &mut h) };
    (s, h)
}

#[test]
fn episode_matches_the_library() {
    let (s, h) = new_env(None, 4);
    assert_eq!(s, PushrecStatus::Ok);
    let (no, na) = unsafe { (pushrec_env_observation_dim(h), pushrec_env_action_dim(h)) };
    assert_eq!((no, na), (28, 8));
    let mut env = Env::new(ModelConfig::default(), EnvConfig::default(), 4).unwrap();
    let mut obs = vec![0.0; no];
    unsafe { assert_eq!(pushrec_env_reset(h, 99, obs.as_mut_ptr(), no), PushrecStatus::Ok) };
    assert_eq!(obs, env.reset_with_seed(99));
    let action = vec![0.1; na];
    for _ in 0..20 {
        let (mut r, mut done, mut failure) = (0.0, 0u8, 0u8);
        let s = unsafe { pushrec_env_step(h, action.as_ptr(), na, obs.as_mut_ptr(), no, &mut r, &mut done, &mut failure) };
        assert_eq!(s, PushrecStatus::Ok);
        let out = env.step(&action).unwrap();
        assert_eq!(obs, out.observation);
        assert_eq!(r, out.reward);
        assert_eq!(done != 0, out.done);
        assert_eq!(failure != 0, out.failure);
    }
    unsafe { pushrec_env_free(h) };
}

#[test]
fn errors_are_reported() {
    let (s, h) = new_env(Some("control_dt = 0.0305\n"), 0);
    assert_eq!(s, PushrecStatus::Config);
    assert!(h.is_null());
    assert!(last_error().contains("control_dt"), "{}", last_error());

    let (_, h) = new_env(None, 0);
    let mut obs = vec![0.0; 28];
    unsafe {
        assert_eq!(pushrec_env_reset(h, 1, obs.as_mut_ptr(), 10), PushrecStatus::InvalidArgument);
        assert_eq!(pushrec_env_reset(ptr::null_mut(), 1, obs.as_mut_ptr(), 28), PushrecStatus::NullPointer);
        assert_eq!(pushrec_env_schedule_push(h, -1.0, 0.2, 0.0, 10.0), PushrecStatus::InvalidArgument);
        let a = [0.0; 7];
        let (mut r, mut d, mut f) = (0.0, 0u8, 0u8);
        assert_eq!(pushrec_env_reset(h, 1, obs.as_mut_ptr(), 28), PushrecStatus::Ok);
        assert_eq!(
            pushrec_env_step(h, a.as_ptr(), 7, obs.as_mut_ptr(), 28, &mut r, &mut d, &mut f),
            PushrecStatus::InvalidArgument
        );
        pushrec_env_free(h);
        pushrec_env_free(ptr::null_mut());
    }
}

#[test]
fn finished_episode_needs_reset() {
    let (_, h) = new_env(Some("max_duration = 0.08\nperturbation.enabled = false\n"), 0);
    let mut obs = vec![0.0; 28];
    let a = [0.0; 8];
    let (mut r, mut d, mut f) = (0.0, 0u8, 0u8);
    unsafe {
        pushrec_env_reset_next(h, obs.as_mut_ptr(), 28);
        for _ in 0..2 {
            assert_eq!(
                pushrec_env_step(h, a.as_ptr(), 8, obs.as_mut_ptr(), 28, &mut r, &mut d, &mut f),
                PushrecStatus::Ok
            );
        }
        assert_eq!(d, 1);
        assert_eq!(f, 0);
        assert_eq!(
            pushrec_env_step(h, a.as_ptr(), 8, obs.as_mut_ptr(), 28, &mut r, &mut d, &mut f),
            PushrecStatus::EpisodeFinished
        );
        pushrec_env_free(h);
    }
}

#[test]
fn scheduled_push_knocks_the_robot_over() {
    let (_, h) = new_env(
        Some("perturbation.enabled = false\nrandomization.mass = false\nrandomization.friction = false\nrandomization.delay = false\n"),
        0,
    );
    let mut obs = vec![0.0; 28];
    let a = [0.0; 8];
    let (mut r, mut d, mut f) = (0.0, 0u8, 0u8);
    unsafe {
        assert_eq!(pushrec_env_schedule_push(h, 0.5, 0.2, 0.0, 2000.0), PushrecStatus::Ok);
        pushrec_env_reset(h, 3, obs.as_mut_ptr(), 28);
        while d == 0 {
            pushrec_env_step(h, a.as_ptr(), 8, obs.as_mut_ptr(), 28, &mut r, &mut d, &mut f);
        }
        assert_eq!(f, 1);
        pushrec_env_free(h);
    }
}

#[test]
fn policy_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.bin");
    let setup = TrainSetup {
        model_config: ModelConfig::default(),
        env_config: EnvConfig::default(),
        ppo: PpoConfig {
            hidden: vec![8, 8],
            ..PpoConfig::default()
        },
        seed: 2,
    };
    let trainer = Trainer::new(setup).unwrap();
    let ckpt = trainer.checkpoint();
    ckpt.save(&path).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(pushrec_policy_load(c_path.as_ptr(), &mut p), PushrecStatus::Ok);
        let hash = CStr::from_ptr(pushrec_policy_config_hash(p)).to_str().unwrap().to_string();
        assert_eq!(hash, trainer.config_hash);
        let obs = vec![0.3; 28];
        let mut action = vec![0.0; 8];
        assert_eq!(pushrec_policy_act(p, obs.as_ptr(), 28, action.as_mut_ptr(), 8), PushrecStatus::Ok);
        assert_eq!(action, trainer.net.policy.mean_action(&obs).unwrap());
        assert_eq!(pushrec_policy_act(p, obs.as_ptr(), 27, action.as_mut_ptr(), 8), PushrecStatus::InvalidArgument);
        pushrec_policy_free(p);

        let missing = CString::new(dir.path().join("nope.bin").to_str().unwrap()).unwrap();
        let mut q = ptr::null_mut();
        assert_eq!(pushrec_policy_load(missing.as_ptr(), &mut q), PushrecStatus::NotFound);
        assert!(last_error().contains("checkpoint not found"));
        std::fs::write(&path, b"garbage").unwrap();
        assert_eq!(pushrec_policy_load(c_path.as_ptr(), &mut q), PushrecStatus::Checkpoint);
        assert!(q.is_null());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(pushrec_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(dir.join("pushrec.h")).unwrap();
    for f in [
        "pushrec_env_new",
        "pushrec_env_step",
        "pushrec_env_reset",
        "pushrec_env_free",
        "pushrec_policy_load",
        "pushrec_policy_act",
        "pushrec_policy_free",
        "pushrec_last_error",
        "PUSHREC_STATUS_DIVERGED",
    ] {
        assert!(header.contains(f), "{f} missing from header");
    }
    let Ok(cc) = which_cc() else { return };
    let src = tempfile::Builder::new().suffix(".c").tempfile().unwrap();
    std::fs::write(
        src.path(),
        "#include \"pushrec.h\"\nint main(void) { PushrecEnv *e = 0; double o[28]; return pushrec_env_new(0, 0, 1, &e) == PUSHREC_STATUS_OK ? (int)pushrec_env_reset(e, 1, o, 28) : 1; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&dir)
        .arg(src.path())
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
