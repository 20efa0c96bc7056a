//! Local empirical processes under strongly mixing data.
//!
//! The crate generates stationary alpha-mixing sequences `(X_i, Z_i)`,
//! evaluates the local empirical process
//! `S_n(x, f; h) = (nh)^{-1/2} sum_i 1{x - h <= X_i <= x + h} f(Z_i)` and its
//! uniform deviation from its mean over location, bandwidth and a finite
//! function family, computes the closed-form maximal-inequality bounds and
//! rates for that deviation, and runs Monte Carlo experiments comparing the
//! two through empirical Orlicz norms.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod function_family;
pub mod local_process;
pub mod orlicz;
pub mod process_gen;
pub mod rng;

mod quad;

pub use error::{Error, Result};

/// Formats a float with 17 significant digits, the CSV number format.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}
