//! Model-selection toolkit: empirical-risk selection over finite families,
//! hold-out selection with exact excess risks, and data-driven penalty
//! calibration (dimension jump + doubling rule) on synthetic problems whose
//! ground truth is known exactly.
//!
//! The crate is organised bottom-up:
//!
//! * [`modulus`]: power-family variance/risk link `φ(x) = c·x^p`, its inverse,
//!   convex conjugate and the derived rate quantities.
//! * [`selection`]: candidate families, ERM selection, Bernstein deviation and
//!   the finite-family tail / expectation bounds with a Monte Carlo checker.
//! * [`holdout`]: split / fit / select pipeline and the oracle-inequality check.
//! * [`calibration`]: penalised selection, penalty paths, dimension-jump
//!   detection, doubled penalties, within-model diagnostics, dimension grouping.
//! * [`problems`]: synthetic classification, fixed-design Gaussian regression
//!   and change-point problems, plus the estimators fitted on them.
//! * [`harness`]: experiment configuration, Monte Carlo orchestration, run
//!   records, CSV emission and reports.

// `!(x >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod error;
pub mod harness;
pub mod holdout;
pub mod modulus;
pub mod problems;
pub mod rng;
pub mod selection;

pub use error::{Error, Result};
pub use modulus::{PowerModulus, RateQuantities};
