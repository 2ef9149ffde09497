pub mod bounds;
pub mod calibrate;
pub mod finalize;
pub mod fit_spline;
pub mod interim;
pub mod simulate;
