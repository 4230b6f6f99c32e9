//! Search, refinement and interval-arithmetic certification of persistent
//! solutions and periodic orbits of controlled pendulum and cartpole
//! swing-up dynamics.

// `!(a < b)` is deliberate throughout: it rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod certify;
pub mod controllers;
pub mod decimal;
pub mod dynamics;
pub mod error;
pub mod interval;
pub mod pipeline;
pub mod prover;
pub mod scalar;
pub mod search;

pub use error::{Error, GuardError, Result};
pub use interval::{Interval, IntervalMatrix, IntervalVector};
