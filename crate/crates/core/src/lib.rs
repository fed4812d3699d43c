// Negated float comparisons reject NaN on purpose; tensor loops index several arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod brownian;
pub mod cli;
pub mod coefficients;
pub mod config;
pub mod convergence;
pub mod davie;
pub mod error;
pub mod integrate;
pub mod rng;
pub mod roughlift;
pub mod stats;

pub use error::{Error, Result};
