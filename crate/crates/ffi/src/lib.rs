//! C ABI over the pushrec environment and trained policies.
//!
//! Every function returns a [`PushrecStatus`]; on failure a message is kept
//! per thread and can be read with [`pushrec_last_error`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pushrec::dynamics::model::ModelConfig;
use pushrec::env::{Env, EnvConfig, EnvError, ForceEvent};
use pushrec::neural::{Checkpoint, CheckpointError, GaussianPolicy};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushrecStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NotFound = 4,
    Checkpoint = 5,
    Diverged = 6,
    EpisodeFinished = 7,
    Panic = 8,
}

/// One simulation environment.
pub struct PushrecEnv {
    env: Env,
}

/// Deterministic (mean-action) policy from a checkpoint.
pub struct PushrecPolicy {
    policy: GaussianPolicy,
    config_hash: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn fail(status: PushrecStatus, msg: impl Into<String>) -> PushrecStatus {
    set_error(msg);
    status
}

fn env_status(e: EnvError) -> PushrecStatus {
    match e {
        EnvError::Dynamics(_) => fail(PushrecStatus::Diverged, e.to_string()),
        EnvError::EpisodeOver => fail(PushrecStatus::EpisodeFinished, e.to_string()),
        _ => fail(PushrecStatus::InvalidArgument, e.to_string()),
    }
}

fn guard(f: impl FnOnce() -> PushrecStatus) -> PushrecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == PushrecStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(PushrecStatus::Panic, "internal panic"),
    }
}

/// Optional C string argument; null means "use the default".
unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, PushrecStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(PushrecStatus::InvalidArgument, "string is not valid UTF-8"))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], PushrecStatus> {
    if p.is_null() {
        return Err(fail(PushrecStatus::NullPointer, format!("{what} is null")));
    }
    if len < need {
        return Err(fail(PushrecStatus::InvalidArgument, format!("{what} holds {len} values, need {need}")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn slice<'a>(p: *const f64, len: usize, need: usize, what: &str) -> Result<&'a [f64], PushrecStatus> {
    if p.is_null() {
        return Err(fail(PushrecStatus::NullPointer, format!("{what} is null")));
    }
    if len != need {
        return Err(fail(PushrecStatus::InvalidArgument, format!("{what} has {len} values, expected {need}")));
    }
    Ok(std::slice::from_raw_parts(p, need))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pushrec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// NUL-terminated) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pushrec_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow().as_bytes().to_vec();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates an environment. `model_config` and `env_config` hold config text
/// and may be null for the defaults. `seed` seeds the episode sequence used
/// by `pushrec_env_reset_next`.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pushrec_env_new(model_config: *const c_char, env_config: *const c_char, seed: u64, out: *mut *mut PushrecEnv) -> PushrecStatus {
    guard(|| {
        if out.is_null() {
            return fail(PushrecStatus::NullPointer, "out is null");
        }
        let model = match tri!(opt_str(model_config)) {
            Some(t) => tri!(ModelConfig::parse(t).map_err(|e| fail(PushrecStatus::Config, e.to_string()))),
            None => ModelConfig::default(),
        };
        let env_cfg = match tri!(opt_str(env_config)) {
            Some(t) => tri!(EnvConfig::parse(t).map_err(|e| fail(PushrecStatus::Config, e.to_string()))),
            None => EnvConfig::default(),
        };
        let env = match Env::new(model, env_cfg, seed) {
            Ok(e) => e,
            Err(e) => return fail(PushrecStatus::Config, e.to_string()),
        };
        *out = Box::into_raw(Box::new(PushrecEnv { env }));
        PushrecStatus::Ok
    })
}

/// # Safety
/// `env` must be null or a handle from `pushrec_env_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pushrec_env_free(env: *mut PushrecEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pushrec_env_observation_dim(env: *const PushrecEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.observation_dim())
}

/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pushrec_env_action_dim(env: *const PushrecEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.action_dim())
}

/// Starts the episode identified by `episode_seed` and writes its first
/// observation.
///
/// # Safety
/// `env` must be a live handle; `obs` must hold `obs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pushrec_env_reset(env: *mut PushrecEnv, episode_seed: u64, obs: *mut f64, obs_len: usize) -> PushrecStatus {
    guard(|| {
        let Some(h) = env.as_mut() else {
            return fail(PushrecStatus::NullPointer, "env is null");
        };
        let out = tri!(slice_mut(obs, obs_len, h.env.observation_dim(), "obs"));
        out.copy_from_slice(&h.env.reset_with_seed(episode_seed));
        PushrecStatus::Ok
    })
}

/// Starts the next episode of the environment's seed sequence.
///
/// # Safety
/// As for `pushrec_env_reset`.
#[no_mangle]
pub unsafe extern "C" fn pushrec_env_reset_next(env: *mut PushrecEnv, obs: *mut f64, obs_len: usize) -> PushrecStatus {
    guard(|| {
        let Some(h) = env.as_mut() else {
            return fail(PushrecStatus::NullPointer, "env is null");
        };
        let out = tri!(slice_mut(obs, obs_len, h.env.observation_dim(), "obs"));
        out.copy_from_slice(&h.env.reset());
        PushrecStatus::Ok
    })
}

/// Schedules a push on the base for the episodes that follow: start and
/// duration in s, direction in rad (0 pushes forward), magnitude in N.
///
/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pushrec_env_schedule_push(env: *mut PushrecEnv, start: f64, duration: f64, direction: f64, magnitude: f64) -> PushrecStatus {
    guard(|| {
        let Some(h) = env.as_mut() else {
            return fail(PushrecStatus::NullPointer, "env is null");
        };
        if !(start >= 0.0 && duration > 0.0 && direction.is_finite() && magnitude.is_finite()) {
            return fail(PushrecStatus::InvalidArgument, "push needs start >= 0, duration > 0 and finite values");
        }
        let mut pushes = h.env.scripted().to_vec();
        pushes.push(ForceEvent::new(start, duration, direction, magnitude, 0));
        h.env.set_scripted(pushes);
        PushrecStatus::Ok
    })
}

/// Advances one control step. `done` and `failure` receive 0 or 1.
///
/// # Safety
/// `env` must be a live handle; buffers must hold the stated lengths;
/// `reward`, `done` and `failure` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn pushrec_env_step(
    env: *mut PushrecEnv,
    action: *const f64,
    action_len: usize,
    obs: *mut f64,
    obs_len: usize,
    reward: *mut f64,
    done: *mut u8,
    failure: *mut u8,
) -> PushrecStatus {
    guard(|| {
        let Some(h) = env.as_mut() else {
            return fail(PushrecStatus::NullPointer, "env is null");
        };
        if reward.is_null() || done.is_null() || failure.is_null() {
            return fail(PushrecStatus::NullPointer, "reward, done and failure must be writable");
        }
        let a = tri!(slice(action, action_len, h.env.action_dim(), "action"));
        let o = tri!(slice_mut(obs, obs_len, h.env.observation_dim(), "obs"));
        match h.env.step(a) {
            Ok(step) => {
                o.copy_from_slice(&step.observation);
                *reward = step.reward;
                *done = step.done as u8;
                *failure = step.failure as u8;
                PushrecStatus::Ok
            }
            Err(e) => env_status(e),
        }
    })
}

/// Loads the policy of a checkpoint file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pushrec_policy_load(path: *const c_char, out: *mut *mut PushrecPolicy) -> PushrecStatus {
    guard(|| {
        if out.is_null() {
            return fail(PushrecStatus::NullPointer, "out is null");
        }
        let Some(p) = tri!(opt_str(path)) else {
            return fail(PushrecStatus::NullPointer, "path is null");
        };
        let ckpt = match Checkpoint::load(Path::new(p)) {
            Ok(c) => c,
            Err(e @ CheckpointError::NotFound(_)) => return fail(PushrecStatus::NotFound, e.to_string()),
            Err(e) => return fail(PushrecStatus::Checkpoint, e.to_string()),
        };
        let config_hash = CString::new(ckpt.config_hash).expect("hex has no NUL");
        *out = Box::into_raw(Box::new(PushrecPolicy {
            policy: ckpt.net.policy,
            config_hash,
        }));
        PushrecStatus::Ok
    })
}

/// # Safety
/// `policy` must be null or a handle from `pushrec_policy_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pushrec_policy_free(policy: *mut PushrecPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Interface hash the policy was trained with, as a NUL-terminated hex
/// string owned by the handle.
///
/// # Safety
/// `policy` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pushrec_policy_config_hash(policy: *const PushrecPolicy) -> *const c_char {
    policy.as_ref().map_or(ptr::null(), |p| p.config_hash.as_ptr())
}

/// Writes the mean action for `obs`.
///
/// # Safety
/// `policy` must be a live handle; buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn pushrec_policy_act(
    policy: *const PushrecPolicy,
    obs: *const f64,
    obs_len: usize,
    action: *mut f64,
    action_len: usize,
) -> PushrecStatus {
    guard(|| {
        let Some(p) = policy.as_ref() else {
            return fail(PushrecStatus::NullPointer, "policy is null");
        };
        let o = tri!(slice(obs, obs_len, p.policy.mean.input_dim(), "obs"));
        let a = tri!(slice_mut(action, action_len, p.policy.mean.output_dim(), "action"));
        match p.policy.mean_action(o) {
            Ok(m) => {
                a.copy_from_slice(&m);
                PushrecStatus::Ok
            }
            Err(e) => fail(PushrecStatus::InvalidArgument, e.to_string()),
        }
    })
}
