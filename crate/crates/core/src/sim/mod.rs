//! End-to-end two-stage trials and replicated Monte Carlo studies.

mod output;
mod procedure;
mod study;
mod trial;

pub use output::{format_g6, write_results_csv, write_selection_csv, write_spline_csv};
pub use procedure::{FirstStage, Procedure, ProcedureKind, SecondStage, Stages};
pub use study::{simulate, CellResult, CellSpec, ProcedureSummary, StudyResult, StudySpec};
pub use trial::{run_two_stage_trial, ReplicateRunner, TrialResult, TrialSettings};
