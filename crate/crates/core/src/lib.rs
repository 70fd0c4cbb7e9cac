//! Distributed recursive least-squares over noisy sensor networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`numkit`]: dense linear-algebra helpers.
//! * [`topology`]: random geometric graphs and Laplacians.
//! * [`signalgen`]: regressors, observations and link noise.
//! * [`estimators`]: D-RLS (single time scale), AD-MoM, batch AMA and
//!   reference least-squares estimators.
//! * [`analysis`]: closed-form mean and mean-square performance.
//! * [`harness`]: Monte Carlo ensembles, empirical metrics and comparison.

pub mod analysis;
pub mod estimators;
pub mod harness;
pub mod numkit;
pub mod signalgen;
pub mod topology;
