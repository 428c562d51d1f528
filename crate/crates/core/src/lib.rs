//! Forward models, a density-matrix oracle and localization inference for
//! magnetic resonance with a network of surface reporter spins read out by a
//! shallow NV center.
//!
//! Units throughout: angular frequencies in rad/μs, times in μs, fields in G,
//! distances in nm.

// `!(x > 0.0)` is how NaN gets rejected; the oracle indexes tensor-product
// blocks by hand.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod inference;
pub mod io;
pub mod physics;
pub mod oracle;
pub mod signal;

pub use error::{Error, Result};
pub use physics::{FieldSetting, HyperfineParams, PhysicalConstants, SpinSystem, Vec3};
pub use signal::{BathParams, DecoherenceParams, SignalTrace};
