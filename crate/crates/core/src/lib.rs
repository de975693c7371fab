//! Direction-of-arrival estimation for semi-passive IRS sensing.
//!
//! * [`scene`] builds steering vectors, path gains, RE measurement schedules
//!   and noisy echoes.
//! * [`anm`] estimates directions from the dual of an atomic-norm program
//!   that exploits both the RE and the SE array.
//! * [`music`] is the SE-only subspace baseline.
//! * [`crb`] assembles the Fisher information and Cramér–Rao bounds.
//! * [`harness`] runs Monte-Carlo sweeps and writes CSV summaries.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anm;
pub mod config;
pub mod crb;
pub mod error;
pub mod harness;
pub mod music;
pub mod numerics;
pub mod rng;
pub mod scene;
pub mod spectrum;

pub use error::{Error, Result};
