//! Planar biped push-recovery learning.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod eval;
pub mod fsutil;
pub mod neural;
pub mod ppo;
