use npsurv_core::design::{StageDecision, TwoStageDesign};
use npsurv_core::logrank::{standardized_increment, WeightSpec};
use npsurv_core::survival::Snapshot;
use npsurv_core::Error;
use serde::Serialize;

use super::interim::{load_dataset, InterimReport, IMPUTE_FINAL};
use crate::args::FinalArgs;
use crate::failure::{CmdResult, Failure};
use crate::io::{read_json, write_json};

#[derive(Debug, Serialize)]
struct FinalReport {
    p1: f64,
    selected_weight: WeightSpec,
    imputation_seed: Option<u64>,
    events: usize,
    increment_z: Option<f64>,
    p2: f64,
    combined_p: f64,
    c: f64,
    decision: StageDecision,
    /// Combined p-value of every mdir set and candidate.
    table: Option<Vec<TableRow>>,
}

#[derive(Debug, Serialize)]
struct TableRow {
    weights: Vec<WeightSpec>,
    p1: f64,
    combined_p: Vec<CombinedEntry>,
}

#[derive(Debug, Serialize)]
struct CombinedEntry {
    weight: WeightSpec,
    p2: f64,
    combined_p: f64,
}

/// Increment z and p-value; without new information the p-value is 1.
fn second_stage(snap1: &Snapshot, snap2: &Snapshot, weight: &WeightSpec) -> Result<(Option<f64>, f64), Failure> {
    if !snap2.has_both_groups() {
        return Ok((None, 1.0));
    }
    match standardized_increment(snap1, snap2, weight) {
        Ok(r) => Ok((Some(r.z), r.p2)),
        Err(Error::NoSecondStageInformation(_)) => Ok((None, 1.0)),
        Err(e) => Err(e.into()),
    }
}

pub fn run(args: FinalArgs) -> CmdResult {
    let interim: InterimReport = read_json(&args.interim)?;
    let design: TwoStageDesign = interim.design.build()?;
    if interim.decision != StageDecision::Continue {
        return Err(Failure::usage(format!(
            "the trial was already decided at the interim ({:?}); there is no final analysis",
            interim.decision
        )));
    }
    let weight = interim
        .selected_weight
        .ok_or_else(|| Failure::usage("interim report has no selected weight"))?;
    let (data, imputation_seed) = load_dataset(&args.ipd, design.t2, interim.seed, IMPUTE_FINAL)?;
    let snap1 = data.snapshot(design.t1);
    let snap2 = data.snapshot(design.t2);
    let (increment_z, p2) = second_stage(&snap1, &snap2, &weight)?;

    let table = match &interim.mdir_subsets {
        Some(rows) => {
            let p2s = interim
                .candidates
                .iter()
                .map(|w| second_stage(&snap1, &snap2, w).map(|(_, p)| (*w, p)))
                .collect::<Result<Vec<_>, _>>()?;
            Some(
                rows.iter()
                    .map(|row| TableRow {
                        weights: row.weights.clone(),
                        p1: row.p1,
                        combined_p: p2s
                            .iter()
                            .map(|&(weight, p2)| CombinedEntry { weight, p2, combined_p: design.combine(row.p1, p2) })
                            .collect(),
                    })
                    .collect(),
            )
        }
        None => None,
    };

    let report = FinalReport {
        p1: interim.p1,
        selected_weight: weight,
        imputation_seed,
        events: snap2.event_count(),
        increment_z,
        p2,
        combined_p: design.combine(interim.p1, p2),
        c: design.c,
        decision: design.decide(interim.p1, Some(p2)),
        table,
    };
    write_json(&report, args.out.as_deref())
}
