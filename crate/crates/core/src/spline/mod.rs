//! Royston-Parmar flexible parametric survival models.
//!
//! A link transform of the survival function is a natural cubic spline in log time:
//! `g(S(t)) = s(log t; φ)`. Three links are supported: log cumulative hazard, log
//! cumulative odds and the probit. Beyond the boundary knots the spline is linear,
//! which gives Weibull, log-logistic and log-normal tails respectively.

mod basis;
mod fit;
mod model;

pub use basis::{basis, basis_derivative, place_knots, KnotVector};
pub use fit::{
    aic, argmin_aic, combined_aic, fit, fit_both_groups, fit_grid, log_likelihood, select_model, FitConfig,
    FittedGrid, GridPoint, SplineData,
};
pub use model::{GroupExtrapolation, SplineDump, SplineModel, SplineScale};
