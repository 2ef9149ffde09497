use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use npsurv_core::cond_power::VarianceForm;
use npsurv_core::logrank::WeightSpec;
use npsurv_core::spline::SplineScale;

#[derive(Debug, Parser)]
#[command(name = "npsurv", version, about = "Adaptive two-stage weighted log-rank testing for survival trials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rejection bounds of an inverse-normal two-stage design.
    Bounds(BoundsArgs),
    /// Interim analysis: first-stage mdir test and second-stage weight selection.
    Interim(InterimArgs),
    /// Final analysis of a trial that continued past the interim.
    Final(FinalArgs),
    /// Monte Carlo type I error or power study.
    Simulate(SimulateArgs),
    /// Royston-Parmar spline fits and their AIC table.
    FitSpline(FitSplineArgs),
    /// Effect size giving the target overall power.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundType {
    Obf,
    Pocock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceArg {
    Consistent,
    AsPrinted,
}

impl From<VarianceArg> for VarianceForm {
    fn from(v: VarianceArg) -> Self {
        match v {
            VarianceArg::Consistent => VarianceForm::Consistent,
            VarianceArg::AsPrinted => VarianceForm::AsPrinted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupArg {
    Control,
    Treatment,
    Both,
}

fn parse_weight(s: &str) -> Result<WeightSpec, String> {
    s.parse().map_err(|e: npsurv_core::Error| e.to_string())
}

fn parse_scale(s: &str) -> Result<SplineScale, String> {
    s.parse().map_err(|e: npsurv_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long = "type", value_enum, default_value = "obf")]
    pub shape: BoundType,
    /// Inverse-normal weights `w1,w2` with `w1² + w2² = 1`.
    #[arg(long, value_delimiter = ',', default_values_t = [std::f64::consts::FRAC_1_SQRT_2; 2])]
    pub weights: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SplineGrid {
    /// Numbers of internal knots.
    #[arg(long = "spline-p", value_delimiter = ',', default_values_t = [0usize, 1, 2])]
    pub ps: Vec<usize>,
    #[arg(long = "spline-scales", value_delimiter = ',', value_parser = parse_scale,
          default_values = ["hazard", "odds", "normal"])]
    pub scales: Vec<SplineScale>,
}

#[derive(Debug, Args)]
pub struct InterimArgs {
    /// CSV with columns id,time,event,group[,entry], observed at the interim.
    #[arg(long)]
    pub ipd: PathBuf,
    /// Design JSON.
    #[arg(long)]
    pub design: PathBuf,
    /// Weights of the first-stage mdir test, e.g. `fh:0,0 fh:1,0`.
    #[arg(long = "mdir-weights", num_args = 1.., value_parser = parse_weight,
          default_values = ["fh:0,0", "fh:1,0", "fh:0,1"])]
    pub mdir_weights: Vec<WeightSpec>,
    /// Second-stage candidate weights.
    #[arg(long, num_args = 1.., value_parser = parse_weight,
          default_values = ["fh:0,0", "fh:1,0", "fh:2,0", "fh:3,0", "fh:1,1", "fh:0,1", "fh:0,2", "fh:0,3"])]
    pub candidates: Vec<WeightSpec>,
    #[command(flatten)]
    pub grid: SplineGrid,
    /// Wild-bootstrap replications. The p-value is at least 1/(B+1), so B must exceed
    /// 1/alpha1 for an interim rejection to be possible.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Planned recruitment period; entries are assumed uniform on `[0, accrual]`.
    #[arg(long)]
    pub accrual: f64,
    /// Planned total sample size; defaults to the number of records.
    #[arg(long = "n-total")]
    pub n_total: Option<usize>,
    /// Planned share of patients in the treatment group.
    #[arg(long, default_value_t = 0.5)]
    pub allocation: f64,
    #[arg(long = "variance-form", value_enum, default_value = "consistent")]
    pub variance_form: VarianceArg,
    /// Also evaluate every mdir set containing the first weight.
    #[arg(long = "all-mdir-subsets")]
    pub all_mdir_subsets: bool,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FinalArgs {
    /// CSV observed at the final analysis.
    #[arg(long)]
    pub ipd: PathBuf,
    /// Report written by `interim`.
    #[arg(long)]
    pub interim: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Study JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the replicate count of the config.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, env = "NPSURV_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    /// Check the expected power orderings after the run.
    #[arg(long = "assert-paper")]
    pub assert_paper: bool,
}

#[derive(Debug, Args)]
pub struct FitSplineArgs {
    #[arg(long)]
    pub ipd: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub group: GroupArg,
    #[command(flatten)]
    pub grid: SplineGrid,
    /// Writes the fitted models as JSON.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Scenario JSON; its effect size is ignored.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub design: PathBuf,
    /// Weight of the two-stage test; defaults to the scenario's own FH weight.
    #[arg(long, value_parser = parse_weight)]
    pub weight: Option<WeightSpec>,
    #[arg(long, default_value_t = 0.5)]
    pub target: f64,
    #[arg(long = "variance-form", value_enum, default_value = "consistent")]
    pub variance_form: VarianceArg,
}
