//! Trial panels, administrative-censoring snapshots and nonparametric estimators.

mod data;
mod estimators;
mod ipd;

pub use data::{Group, Record, Snapshot, Stratum, Subject, SurvivalDataset};
pub use estimators::{kaplan_meier, nelson_aalen, StepFunction};
pub use ipd::{impute_recruitment, read_ipd, read_ipd_file, Ipd, IpdRecord};
