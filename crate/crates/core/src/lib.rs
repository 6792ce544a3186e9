//! Deterministic closed-loop driving simulation and evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod map;
pub mod metrics;
pub mod par;
pub mod policy;
pub mod procgen;
pub mod rng;
pub mod scenario;
pub mod traffic;
pub mod tta;
pub mod vehicle;
pub use error::{Error, Result};
