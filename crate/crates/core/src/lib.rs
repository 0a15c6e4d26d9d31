//! Predictive cost adaptive control of discrete-time Lur'e systems with
//! instantaneous absolute-stability certification.
//!
//! The crate simulates a discrete-time Lur'e plant (linear dynamics in
//! feedback with a sector-bounded nonlinearity), identifies an input-output
//! model online by recursive least squares with F-test variable-rate
//! forgetting, realizes it in block observable canonical form, computes a
//! receding-horizon gain by a backward Riccati recursion, and certifies the
//! instantaneous closed loop with the discrete-time circle and Tsypkin
//! criteria.

pub mod bocf;
pub mod bpre;
pub mod certify;
pub mod error;
pub mod fdist;
pub mod lure;
pub mod pcac;
pub mod rlsvrf;
pub mod sslin;

pub use error::{Error, Result};
