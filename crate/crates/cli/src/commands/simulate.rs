use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use npsurv_core::cond_power::{calibrate_theta, VarianceForm};
use npsurv_core::design::DesignConfig;
use npsurv_core::logrank::WeightSpec;
use npsurv_core::scenario::ScenarioConfig;
use npsurv_core::sim::{
    format_g6, simulate, write_results_csv, write_selection_csv, write_spline_csv, CellResult, CellSpec, Procedure,
    ProcedureKind, StudyResult, StudySpec, TrialSettings,
};
use npsurv_core::spline::SplineScale;
use serde::Deserialize;

use crate::args::SimulateArgs;
use crate::failure::{CmdResult, Failure};
use crate::io::read_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum StudyKind {
    Type1,
    Power,
}

/// A named procedure whose weights follow the scenario, or a fully specified one.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ProcedureEntry {
    Named(ProcedureKind),
    Custom(Procedure),
}

impl ProcedureEntry {
    fn resolve(&self, rho_star: f64, gamma_star: f64) -> Procedure {
        match self {
            ProcedureEntry::Named(kind) => kind.procedure(rho_star, gamma_star),
            ProcedureEntry::Custom(p) => p.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyConfig {
    kind: StudyKind,
    design: DesignConfig,
    scenarios: Vec<ScenarioConfig>,
    #[serde(default = "unit_multiple")]
    theta_multiples: Vec<f64>,
    procedures: Vec<ProcedureEntry>,
    #[serde(default = "default_replicates")]
    replicates: usize,
    #[serde(default = "default_bootstrap")]
    bootstrap_reps: usize,
    #[serde(default = "default_ps")]
    spline_ps: Vec<usize>,
    #[serde(default = "default_scales")]
    spline_scales: Vec<SplineScale>,
    #[serde(default)]
    variance_form: VarianceForm,
    /// Overall power that defines `θ₀`.
    #[serde(default = "half")]
    target_power: f64,
}

fn unit_multiple() -> Vec<f64> {
    vec![1.0]
}
fn default_replicates() -> usize {
    1000
}
fn default_bootstrap() -> usize {
    1000
}
fn default_ps() -> Vec<usize> {
    vec![0, 1, 2]
}
fn default_scales() -> Vec<SplineScale> {
    SplineScale::ALL.to_vec()
}
fn half() -> f64 {
    0.5
}

struct Theta0 {
    label: String,
    rho_star: f64,
    gamma_star: f64,
    theta0: f64,
}

fn validate(cfg: &StudyConfig) -> CmdResult {
    if cfg.scenarios.is_empty() {
        return Err(Failure::usage("the study has no scenarios"));
    }
    if cfg.procedures.is_empty() {
        return Err(Failure::usage("the study has no procedures"));
    }
    if cfg.bootstrap_reps == 0 {
        return Err(Failure::usage("bootstrap_reps must be positive"));
    }
    if cfg.spline_ps.is_empty() || cfg.spline_scales.is_empty() {
        return Err(Failure::usage("the spline grid is empty"));
    }
    if cfg.kind == StudyKind::Power && cfg.theta_multiples.is_empty() {
        return Err(Failure::usage("theta_multiples is empty"));
    }
    for s in &cfg.scenarios {
        if s.theta_multiple.is_some() {
            return Err(Failure::usage("scenarios take no theta_multiple; list multiples in theta_multiples"));
        }
        if s.t1 != cfg.design.t1 || s.t2 != cfg.design.t2 {
            return Err(Failure::usage(format!(
                "scenario '{}' analyses at ({}, {}) but the design at ({}, {})",
                s.label(),
                s.t1,
                s.t2,
                cfg.design.t1,
                cfg.design.t2
            )));
        }
    }
    Ok(())
}

fn write_csv(dir: &Path, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> npsurv_core::Result<()>) -> CmdResult {
    let mut out = BufWriter::new(File::create(dir.join(name))?);
    write(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn run(args: SimulateArgs) -> CmdResult {
    let cfg: StudyConfig = read_json(&args.config)?;
    validate(&cfg)?;
    let design = cfg.design.build()?;
    let replicates = args.replicates.unwrap_or(cfg.replicates);
    if replicates == 0 {
        return Err(Failure::usage("replicates must be positive"));
    }
    let threads = match args.threads {
        Some(0) => return Err(Failure::usage("--threads must be positive")),
        Some(t) => t,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    fs::create_dir_all(&args.out_dir)?;

    let mut study = StudyResult { cells: Vec::new() };
    let mut thetas = Vec::new();
    for scenario in &cfg.scenarios {
        let base = ScenarioConfig { theta: Some(0.0), ..scenario.clone() }.resolve(None)?;
        base.validate()?;
        let procedures: Vec<Procedure> =
            cfg.procedures.iter().map(|p| p.resolve(base.rho_star, base.gamma_star)).collect();
        let (theta0, multiples) = match cfg.kind {
            StudyKind::Type1 => (0.0, vec![0.0]),
            StudyKind::Power => {
                let theta0 = match scenario.theta {
                    Some(t) => t,
                    None => calibrate_theta(
                        &base,
                        &design,
                        &WeightSpec::fh(base.rho_star, base.gamma_star),
                        cfg.target_power,
                        cfg.variance_form,
                    )?,
                };
                (theta0, cfg.theta_multiples.clone())
            }
        };
        if cfg.kind == StudyKind::Power {
            thetas.push(Theta0 { label: scenario.label(), rho_star: base.rho_star, gamma_star: base.gamma_star, theta0 });
        }
        let cells = multiples
            .iter()
            .map(|&m| CellSpec {
                label: scenario.label(),
                scenario: base.with_theta(m * theta0),
                theta_multiple: m,
                procedures: procedures.clone(),
            })
            .collect();
        let mut settings = TrialSettings::new(design, base.accrual);
        settings.bootstrap_reps = cfg.bootstrap_reps;
        settings.spline_ps = cfg.spline_ps.clone();
        settings.spline_scales = cfg.spline_scales.clone();
        settings.dropout = base.dropout;
        settings.variance_form = cfg.variance_form;
        let spec = StudySpec { cells, settings, replicates, base_seed: args.seed };
        study.cells.extend(simulate(&spec, threads)?.cells);
    }

    write_csv(&args.out_dir, "results.csv", |w| write_results_csv(&study, w))?;
    write_csv(&args.out_dir, "selection.csv", |w| write_selection_csv(&study, w))?;
    write_csv(&args.out_dir, "spline_choice.csv", |w| write_spline_csv(&study, w))?;
    if cfg.kind == StudyKind::Power {
        let mut out = BufWriter::new(File::create(args.out_dir.join("theta0.csv"))?);
        writeln!(out, "scenario,rho_star,gamma_star,theta0")?;
        for t in &thetas {
            writeln!(out, "{},{},{},{}", t.label, format_g6(t.rho_star), format_g6(t.gamma_star), format_g6(t.theta0))?;
        }
        out.flush()?;
    }

    if args.assert_paper {
        let failures = ordering_checks(&study).into_iter().filter(|c| !report(c)).count();
        if failures > 0 {
            return Err(Failure::Compute(format!("{failures} expected ordering(s) not reproduced")));
        }
    }
    Ok(())
}

struct Check {
    name: String,
    passed: bool,
    detail: String,
}

fn report(c: &Check) -> bool {
    eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    c.passed
}

/// `a` beats `b` by more than two standard errors of the paired difference.
fn beats(cell: &CellResult, a: &str, b: &str) -> Option<Check> {
    let (d, se) = cell.power_difference(a, b)?;
    Some(Check {
        name: format!("{} x{}: {a} > {b}", cell.label, format_g6(cell.theta_multiple)),
        passed: d > 2.0 * se,
        detail: format!("difference {} (se {})", format_g6(d), format_g6(se)),
    })
}

fn early_rate(cell: &CellResult, expected: f64) -> Option<Check> {
    let s = cell.summary("TS-AD")?;
    Some(Check {
        name: format!("{} x{}: TS-AD early rejection near {}", cell.label, format_g6(cell.theta_multiple), expected),
        passed: (s.early_rejection_rate - expected).abs() <= 0.03,
        detail: format!("rate {}", format_g6(s.early_rejection_rate)),
    })
}

/// Orderings expected at `θ₀` in the early, late and proportional-hazards scenarios.
fn ordering_checks(study: &StudyResult) -> Vec<Check> {
    let mut checks = Vec::new();
    for cell in study.cells.iter().filter(|c| c.theta_multiple == 1.0) {
        let (rho, gamma) = (cell.scenario.rho_star, cell.scenario.gamma_star);
        if rho == 0.0 && gamma == 0.0 {
            if let Some(lr) = cell.summary("TS-LR") {
                for s in &cell.summaries {
                    checks.push(Check {
                        name: format!("{} x1: {} within 0.1 of TS-LR", cell.label, s.procedure),
                        passed: (s.power - lr.power).abs() <= 0.1,
                        detail: format!("power {} vs {}", format_g6(s.power), format_g6(lr.power)),
                    });
                }
            }
            checks.extend(early_rate(cell, 0.09));
        } else if (rho > 0.0 && gamma == 0.0) || (rho == 0.0 && gamma > 0.0) {
            checks.extend(beats(cell, "TS-optFH", "TS-AD"));
            checks.extend(beats(cell, "TS-AD", "TS-LR"));
            if gamma == 0.0 {
                checks.extend(early_rate(cell, 0.03));
            }
        }
    }
    checks
}
