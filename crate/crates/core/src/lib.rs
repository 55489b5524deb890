#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Monte Carlo laboratory for Brownian motion and Lévy processes on a
//! truncated Hilbert-Schmidt triple `E' ⊂ H ⊂ E`.

pub mod dirichlet;
pub mod error;
pub mod harness;
pub mod lyapunov;
pub mod measures;
pub mod operators;
pub mod potential;
pub mod rng;
pub mod space;
pub mod stats;

pub use error::{Error, Result};
pub use rng::StreamKey;
pub use stats::{McEstimate, McPlan, Verdict};
