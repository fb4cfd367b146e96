//! Simulation and inference for weakly nonstationary regressors.
//!
//! * [`procgen`]: fractional, mildly and nearly integrated sample paths with
//!   exact variance normalizers.
//! * [`kernelfn`]: kernels, their moment constants, additive and kernel
//!   functionals.
//! * [`regress`]: OLS and kernel regression estimators with t statistics.
//! * [`spectest`]: the sum-of-squared-t specification test and the
//!   kernel-weighted residual U-statistic.
//! * [`mc`]: Monte Carlo size / power tables.
//! * [`limitlab`]: quadrature oracles for limit quantities and empirical
//!   convergence checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kernelfn;
pub mod limitlab;
pub mod mc;
pub mod procgen;
pub mod quad;
pub mod regress;
pub mod rng;
pub mod spectest;

pub use error::{Error, Result};
