//! Adaptive two-stage survival trials under non-proportional hazards.
//!
//! The crate covers the full analysis chain of a two-look trial:
//!
//! - [`survival`]: trial panels, administrative-censoring snapshots, Kaplan-Meier and
//!   Nelson-Aalen estimators, IPD ingestion and recruitment imputation.
//! - [`logrank`]: Fleming-Harrington and modest weights, weighted log-rank statistics,
//!   their covariance estimator and standardized calendar-time increments.
//! - [`mdir`]: the one-sided multi-directional combination statistic and its wild
//!   bootstrap p-value.
//! - [`spline`]: Royston-Parmar flexible parametric models fitted per group, with AIC
//!   model selection and extrapolation.
//! - [`design`]: combination functions, O'Brien-Fleming and Pocock bounds, the level
//!   equation, conditional error and the stage-wise decision rule.
//! - [`cond_power`]: planning-time drift and variance integrals, conditional power,
//!   second-stage weight selection and effect-size calibration.
//! - [`scenario`]: synthetic trials for which a chosen Fleming-Harrington test is
//!   locally optimal.
//! - [`sim`]: end-to-end trial execution and replicated Monte Carlo studies.

pub mod cond_power;
pub mod curve;
pub mod design;
pub mod error;
pub mod logrank;
pub mod mdir;
pub mod normal;
pub mod optim;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod spline;
pub mod survival;

pub use error::{Error, Result};
