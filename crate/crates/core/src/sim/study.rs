use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::procedure::Procedure;
use super::trial::{ReplicateRunner, TrialResult, TrialSettings};
use crate::design::StageDecision;
use crate::error::{Error, Result};
use crate::logrank::WeightSpec;
use crate::rng;
use crate::scenario::{sample_trial_with, ScenarioSpec};
use crate::spline::SplineScale;

/// One scenario at one effect size, with the procedures to run on it.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub label: String,
    pub scenario: ScenarioSpec,
    pub theta_multiple: f64,
    pub procedures: Vec<Procedure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub cells: Vec<CellSpec>,
    pub settings: TrialSettings,
    pub replicates: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureSummary {
    pub procedure: String,
    pub replicates: usize,
    pub rejections: usize,
    pub early_rejections: usize,
    pub futility_stops: usize,
    pub acceptances: usize,
    pub continued: usize,
    pub fallbacks: usize,
    pub power: f64,
    pub early_rejection_rate: f64,
    /// Half-width of the normal-approximation 95% interval for the power.
    pub mc_halfwidth: f64,
    /// Second-stage weight counts among continued trials, in candidate order.
    pub selection: Vec<(WeightSpec, usize)>,
    /// Selected spline `(p, scale)` counts among continued trials.
    pub spline_choice: BTreeMap<(usize, SplineScale), usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub label: String,
    pub scenario: ScenarioSpec,
    pub theta_multiple: f64,
    /// `outcomes[procedure][replicate]`.
    pub outcomes: Vec<Vec<TrialResult>>,
    pub summaries: Vec<ProcedureSummary>,
}

impl CellResult {
    pub fn summary(&self, procedure: &str) -> Option<&ProcedureSummary> {
        self.summaries.iter().find(|s| s.procedure == procedure)
    }

    pub fn rejections(&self, procedure: &str) -> Option<Vec<bool>> {
        let k = self.summaries.iter().position(|s| s.procedure == procedure)?;
        Some(self.outcomes[k].iter().map(|r| r.decision.is_rejection()).collect())
    }

    /// Power difference `a - b` and its Monte Carlo standard error. Both procedures
    /// ran on the same datasets, so the error is that of the paired differences.
    pub fn power_difference(&self, a: &str, b: &str) -> Option<(f64, f64)> {
        let (ra, rb) = (self.rejections(a)?, self.rejections(b)?);
        let n = ra.len() as f64;
        let d: Vec<f64> = ra.iter().zip(&rb).map(|(&x, &y)| x as u8 as f64 - y as u8 as f64).collect();
        let mean = d.iter().sum::<f64>() / n;
        let var = if n > 1.0 { d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Some((mean, (var / n).sqrt()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub cells: Vec<CellResult>,
}

fn summarize(procedure: &Procedure, outcomes: &[TrialResult]) -> ProcedureSummary {
    let r = outcomes.len();
    let count = |d: StageDecision| outcomes.iter().filter(|o| o.decision == d).count();
    let early = count(StageDecision::RejectAtInterim);
    let rejections = early + count(StageDecision::RejectAtFinal);
    let mut selection: Vec<(WeightSpec, usize)> = procedure.candidates().iter().map(|&w| (w, 0)).collect();
    let mut spline_choice = BTreeMap::new();
    let mut continued = 0;
    for o in outcomes.iter().filter(|o| o.reached_second_stage()) {
        continued += 1;
        if let Some(w) = o.selected_weight {
            if let Some(slot) = selection.iter_mut().find(|(c, _)| *c == w) {
                slot.1 += 1;
            }
        }
        if let Some(key) = o.selected_spline {
            *spline_choice.entry(key).or_insert(0) += 1;
        }
    }
    let power = rejections as f64 / r as f64;
    ProcedureSummary {
        procedure: procedure.name.clone(),
        replicates: r,
        rejections,
        early_rejections: early,
        futility_stops: count(StageDecision::FutilityStop),
        acceptances: count(StageDecision::AcceptAtFinal),
        continued,
        fallbacks: outcomes.iter().filter(|o| o.fallback).count(),
        power,
        early_rejection_rate: early as f64 / r as f64,
        mc_halfwidth: 1.96 * (power * (1.0 - power) / r as f64).sqrt(),
        selection,
        spline_choice,
    }
}

/// Run every cell of a study. Replicate `i` of every cell draws its data from stream
/// `i` of `base_seed`, so cells differing only in effect size share random numbers, and
/// all procedures of a replicate see the same dataset. Results do not depend on the
/// number of threads.
pub fn simulate(spec: &StudySpec, threads: usize) -> Result<StudyResult> {
    if spec.replicates == 0 {
        return Err(Error::InvalidInput("replicates must be positive".into()));
    }
    if spec.cells.is_empty() {
        return Err(Error::InvalidInput("a study needs at least one scenario cell".into()));
    }
    spec.settings.design.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let mut cells = Vec::with_capacity(spec.cells.len());
    for cell in &spec.cells {
        cell.scenario.validate()?;
        let curve = cell.scenario.treatment_curve();
        let per_replicate: Vec<Vec<TrialResult>> = pool.install(|| {
            (0..spec.replicates)
                .into_par_iter()
                .map(|i| {
                    let mut stream = rng::stream(spec.base_seed, i as u64);
                    let data = sample_trial_with(&cell.scenario, &curve, &mut stream)?;
                    let runner = ReplicateRunner::new(&data, &spec.settings, rng::derive_seed(spec.base_seed, &[i as u64]));
                    cell.procedures.iter().map(|p| runner.run(p)).collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let outcomes: Vec<Vec<TrialResult>> = (0..cell.procedures.len())
            .map(|k| per_replicate.iter().map(|row| row[k].clone()).collect())
            .collect();
        let summaries = cell.procedures.iter().zip(&outcomes).map(|(p, o)| summarize(p, o)).collect();
        cells.push(CellResult {
            label: cell.label.clone(),
            scenario: cell.scenario,
            theta_multiple: cell.theta_multiple,
            outcomes,
            summaries,
        });
    }
    Ok(StudyResult { cells })
}
