//! Value-function learning with Kalman temporal differences, plus a
//! multiple-model bank that adapts the observation-noise setting online.
//!
//! The crate is organized around small, testable pieces:
//!
//! - [`features`]: radial-basis feature maps over (state, action) pairs and a
//!   restricted gradient rule that adapts basis centers and shapes online.
//! - [`ktd`]: the linear-Gaussian core — weight beliefs, prediction,
//!   measurement construction from transitions, and the Kalman update in
//!   Joseph form.
//! - [`mmae`]: a bank of noise hypotheses updated in parallel, weighted by
//!   innovation likelihood, and fused back into a single belief.
//! - [`policy`]: active (information-seeking), greedy, and uniform-random
//!   action selection.
//! - [`envs`]: the inverted pendulum and mountain car control tasks.
//! - [`harness`]: training/evaluation loops, seeded experiment repetition,
//!   sweeps, and CSV/config/snapshot I/O.

pub mod envs;
pub mod error;
pub mod features;
pub mod harness;
pub mod ktd;
pub mod mmae;
pub mod policy;

pub use error::{Error, Result};
