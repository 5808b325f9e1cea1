//! Exact and sketched statistical leverage scores.
//!
//! * [`matrix`]: dense row-major storage, CSV/binary I/O, synthetic data.
//! * [`sketch`]: CountSketch, OSNAP and SRHT applied in the streaming row model.
//! * [`svd`]: thin SVD and relative singular-value truncation.
//! * [`leverage`]: exact, sketched and truncated-sketched scores, plus an oracle.
//! * [`dist`]: coordinator-model sketching over a row partition.
//! * [`order`]: per-epoch training orders from leverage scores.
//! * [`harness`]: timing benchmarks and figure data for the experiments.

pub mod dist;
pub mod error;
pub mod harness;
pub mod leverage;
pub mod limits;
pub mod matrix;
pub mod order;
pub mod rng;
pub mod sketch;
pub mod svd;

pub use error::{Error, Result};
pub use leverage::{
    leverage_exact, leverage_exact_truncated, leverage_oracle, leverage_sketched,
    leverage_sketched_trunc, LeverageResult, Method,
};
pub use matrix::{gen_synthetic, Matrix, SyntheticSpec};
pub use sketch::{SketchFamily, SketchSpec, SketchState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
