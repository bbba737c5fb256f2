//! Versioned binary checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic          8 bytes  "PUSHRECK"
//! version        u32      1
//! config hash    32 bytes SHA-256 of model + env + training config text
//! global step    u64
//! iteration      u64
//! seed           u64      trainer RNG seed
//! word position  u128     trainer RNG stream position
//! kl coefficient f64
//! value scale    f64
//! policy mean    MLP block
//! log std        u32 n, then n × f64
//! value          MLP block
//! optimizer      f64 lr, beta1, beta2, eps; u64 step; u64 n; n × f64 m; n × f64 v
//!
//! MLP block:     u32 layers; per layer u32 rows, u32 cols, u8 activation
//!                (0 identity, 1 rectifier), rows × cols f64 weights
//!                (row-major), rows × f64 bias
//! ```
//!
//! A text sidecar with the same stem and a `.meta` extension repeats the
//! scalar fields for humans.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};

use crate::fsutil::{write_atomic, TOOL_VERSION};

use super::adam::Adam;
use super::gaussian::GaussianPolicy;
use super::mlp::{Activation, Layer, Mlp};
use super::ActorCritic;

pub const MAGIC: &[u8; 8] = b"PUSHRECK";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint not found: {0}")]
    NotFound(PathBuf),
    #[error("cannot access {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("config hash mismatch: checkpoint {found}, current {expected} (use --force to override)")]
    HashMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Hex SHA-256 of the configuration the policy was trained with.
    pub config_hash: String,
    pub global_step: u64,
    pub iteration: u64,
    pub seed: u64,
    pub rng_word_pos: u128,
    pub kl_coeff: f64,
    pub value_scale: f64,
    pub net: ActorCritic,
    pub adam: Adam,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u128(&mut self, v: u128) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        for v in vs {
            self.f64(*v);
        }
    }
    fn mlp(&mut self, net: &Mlp) {
        self.u32(net.layers.len() as u32);
        for l in &net.layers {
            self.u32(l.outputs() as u32);
            self.u32(l.inputs() as u32);
            self.u8(l.activation.tag());
            self.f64s(l.weight.iter());
            self.f64s(l.bias.iter());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Truncated(self.buf.len()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn u128(&mut self) -> Result<u128, CheckpointError> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().expect("16 bytes")))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn len(&mut self, what: &str) -> Result<usize, CheckpointError> {
        let n = self.u32()? as usize;
        // Every element takes at least one byte.
        if n > self.buf.len() {
            return Err(CheckpointError::Corrupt(format!("implausible {what} count {n}")));
        }
        Ok(n)
    }
    fn mlp(&mut self) -> Result<Mlp, CheckpointError> {
        let n = self.len("layer")?;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let rows = self.len("row")?;
            let cols = self.len("column")?;
            let activation = Activation::from_tag(self.u8()?).ok_or_else(|| CheckpointError::Corrupt("unknown activation".into()))?;
            let weight = Array2::from_shape_vec((rows, cols), self.f64s(rows * cols)?).expect("shape matches length");
            let bias = Array1::from_vec(self.f64s(rows)?);
            layers.push(Layer { weight, bias, activation });
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(CheckpointError::Corrupt("layer shapes do not chain".into()));
            }
        }
        if layers.is_empty() {
            return Err(CheckpointError::Corrupt("network without layers".into()));
        }
        Ok(Mlp { layers })
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        let mut hash = [0u8; 32];
        if let Ok(bytes) = hex::decode(&self.config_hash) {
            let n = bytes.len().min(32);
            hash[..n].copy_from_slice(&bytes[..n]);
        }
        w.0.extend_from_slice(&hash);
        w.u64(self.global_step);
        w.u64(self.iteration);
        w.u64(self.seed);
        w.u128(self.rng_word_pos);
        w.f64(self.kl_coeff);
        w.f64(self.value_scale);
        w.mlp(&self.net.policy.mean);
        w.u32(self.net.policy.log_std.len() as u32);
        w.f64s(self.net.policy.log_std.iter());
        w.mlp(&self.net.value);
        let a = &self.adam;
        w.f64(a.lr);
        w.f64(a.beta1);
        w.f64(a.beta2);
        w.f64(a.eps);
        w.u64(a.step);
        w.u64(a.m.len() as u64);
        w.f64s(a.m.iter());
        w.f64s(a.v.iter());
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let config_hash = hex::encode(r.take(32)?);
        let global_step = r.u64()?;
        let iteration = r.u64()?;
        let seed = r.u64()?;
        let rng_word_pos = r.u128()?;
        let kl_coeff = r.f64()?;
        let value_scale = r.f64()?;
        let mean = r.mlp()?;
        let n = r.len("log-std")?;
        let log_std = Array1::from_vec(r.f64s(n)?);
        if n != mean.output_dim() {
            return Err(CheckpointError::Corrupt("log-std length differs from action dimension".into()));
        }
        let value = r.mlp()?;
        if value.input_dim() != mean.input_dim() || value.output_dim() != 1 {
            return Err(CheckpointError::Corrupt("value network shape".into()));
        }
        let (lr, beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let step = r.u64()?;
        let n = r.u64()? as usize;
        let net = ActorCritic {
            policy: GaussianPolicy { mean, log_std },
            value,
        };
        if n != net.n_params() {
            return Err(CheckpointError::Corrupt("optimizer state size".into()));
        }
        let m = r.f64s(n)?;
        let v = r.f64s(n)?;
        if r.pos != buf.len() {
            return Err(CheckpointError::Corrupt(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(Checkpoint {
            config_hash,
            global_step,
            iteration,
            seed,
            rng_word_pos,
            kl_coeff,
            value_scale,
            net,
            adam: Adam {
                lr,
                beta1,
                beta2,
                eps,
                step,
                m,
                v,
            },
        })
    }

    pub fn meta_text(&self) -> String {
        let sizes = |s: Vec<usize>| s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        format!(
            "format_version = {VERSION}\ntool = {TOOL_VERSION}\nconfig_hash = {}\nglobal_step = {}\niteration = {}\nrng_seed = {}\nrng_word_pos = {}\nkl_coeff = {:?}\nvalue_scale = {:?}\npolicy_layers = {}\nvalue_layers = {}\n",
            self.config_hash,
            self.global_step,
            self.iteration,
            self.seed,
            self.rng_word_pos,
            self.kl_coeff,
            self.value_scale,
            sizes(self.net.policy.mean.sizes()),
            sizes(self.net.value.sizes()),
        )
    }

    pub fn meta_path(path: &Path) -> PathBuf {
        path.with_extension("meta")
    }

    /// Writes the checkpoint and its sidecar atomically.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io = |e: std::io::Error| CheckpointError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        };
        write_atomic(path, &self.to_bytes()).map_err(io)?;
        write_atomic(&Self::meta_path(path), self.meta_text().as_bytes()).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CheckpointError::NotFound(path.to_path_buf())
            } else {
                CheckpointError::Io {
                    path: path.to_path_buf(),
                    reason: e.to_string(),
                }
            }
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn check_hash(&self, expected: &str, force: bool) -> Result<(), CheckpointError> {
        if force || self.config_hash == expected {
            Ok(())
        } else {
            Err(CheckpointError::HashMismatch {
                expected: expected.to_string(),
                found: self.config_hash.clone(),
            })
        }
    }
}
