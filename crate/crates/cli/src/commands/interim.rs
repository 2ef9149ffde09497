use npsurv_core::cond_power::{select_weight, CpReport, PlanningAssumptions, VarianceForm};
use npsurv_core::curve::TimeDistribution;
use npsurv_core::design::{DesignConfig, StageDecision, TwoStageDesign};
use npsurv_core::logrank::WeightSpec;
use npsurv_core::mdir::MdirTest;
use npsurv_core::rng;
use npsurv_core::spline::{fit_both_groups, select_model, FitConfig, GroupExtrapolation, SplineDump, SplineScale};
use npsurv_core::survival::{read_ipd_file, Snapshot, SurvivalDataset};
use serde::{Deserialize, Serialize};

use crate::args::InterimArgs;
use crate::failure::{CmdResult, Failure};
use crate::io::{read_json, write_json};

/// Stream tags for the seeds derived from `--seed`.
pub const IMPUTE_INTERIM: u64 = 0x11;
pub const IMPUTE_FINAL: u64 = 0x12;
const BOOTSTRAP: u64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterimReport {
    pub design: DesignConfig,
    pub seed: u64,
    /// Seed of the recruitment imputation, absent when the data carry entry times.
    pub imputation_seed: Option<u64>,
    pub bootstrap_reps: usize,
    pub subjects: usize,
    pub events: usize,
    pub mdir_weights: Vec<WeightSpec>,
    pub candidates: Vec<WeightSpec>,
    pub statistic: f64,
    pub p1: f64,
    pub decision: StageDecision,
    pub variance_form: VarianceForm,
    pub conditional_error: Option<f64>,
    pub spline: Option<SplineSelection>,
    pub cp_report: Option<CpReport>,
    pub selected_weight: Option<WeightSpec>,
    /// Set when no spline model could be used and the log-rank weight was taken.
    pub fallback: bool,
    pub mdir_subsets: Option<Vec<SubsetRow>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AicEntry {
    pub p: usize,
    pub scale: SplineScale,
    pub aic: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineSelection {
    pub p: usize,
    pub scale: SplineScale,
    pub aic_table: Vec<AicEntry>,
    pub control: SplineDump,
    pub treatment: SplineDump,
}

/// First-stage result of one mdir weight set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetRow {
    pub weights: Vec<WeightSpec>,
    pub p1: f64,
    pub decision: StageDecision,
    /// Conditional power of each candidate, in candidate order.
    pub conditional_power: Option<Vec<f64>>,
}

/// Bootstrap p-value of the mdir test; 1 when the test statistic is undefined.
pub fn mdir_pvalue(snap: &Snapshot, weights: &[WeightSpec], reps: usize, seed: u64) -> Result<(f64, f64), Failure> {
    if snap.event_count() == 0 || !snap.has_both_groups() {
        return Ok((0.0, 1.0));
    }
    let label: String = weights.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(";");
    let seed = rng::derive_seed(seed, &[BOOTSTRAP, rng::label_hash(&label)]);
    let res = MdirTest::new(snap, weights)?.bootstrap_pvalue(reps, seed)?;
    Ok((res.statistic, res.p_value))
}

/// `{w₀} ∪ S` for every subset `S` of the remaining weights, largest sets first.
pub fn mdir_subsets(weights: &[WeightSpec]) -> Vec<Vec<WeightSpec>> {
    let (head, rest) = weights.split_first().expect("nonempty weight list");
    let mut out = Vec::new();
    for size in (0..=rest.len()).rev() {
        combinations(rest, size, 0, &mut vec![*head], &mut out);
    }
    out
}

fn combinations(rest: &[WeightSpec], size: usize, from: usize, cur: &mut Vec<WeightSpec>, out: &mut Vec<Vec<WeightSpec>>) {
    if cur.len() == size + 1 {
        out.push(cur.clone());
        return;
    }
    for i in from..rest.len() {
        cur.push(rest[i]);
        combinations(rest, size, i + 1, cur, out);
        cur.pop();
    }
}

pub fn load_dataset(path: &std::path::Path, analysis_time: f64, seed: u64, tag: u64) -> Result<(SurvivalDataset, Option<u64>), Failure> {
    let ipd = read_ipd_file(path)?;
    if ipd.has_entries() {
        return Ok((ipd.to_dataset_with_entries()?, None));
    }
    let imputation_seed = rng::derive_seed(seed, &[tag]);
    let mut stream = rng::stream(imputation_seed, 0);
    Ok((ipd.to_dataset(analysis_time, &mut stream)?, Some(imputation_seed)))
}

struct Planning {
    pair: Option<GroupExtrapolation>,
    aic_table: Vec<AicEntry>,
}

fn plan(snap: &Snapshot, args: &InterimArgs) -> Planning {
    let fits = fit_both_groups(snap, &args.grid.ps, &args.grid.scales, &FitConfig::default());
    let aic_table = fits
        .iter()
        .map(|(p, scale, r)| AicEntry { p: *p, scale: *scale, aic: r.as_ref().ok().map(|g| g.combined_aic()) })
        .collect();
    let ok: Vec<GroupExtrapolation> = fits.into_iter().filter_map(|(_, _, r)| r.ok()).collect();
    Planning { pair: select_model(&ok).ok(), aic_table }
}

fn validate(args: &InterimArgs, design: &TwoStageDesign) -> CmdResult {
    if args.bootstrap == 0 {
        return Err(Failure::usage("--bootstrap must be positive"));
    }
    if !(args.accrual > 0.0 && args.accrual.is_finite()) {
        return Err(Failure::usage("--accrual must be positive"));
    }
    if !(args.allocation > 0.0 && args.allocation < 1.0) {
        return Err(Failure::usage("--allocation must lie in (0, 1)"));
    }
    if args.grid.ps.is_empty() || args.grid.scales.is_empty() {
        return Err(Failure::usage("the spline grid is empty"));
    }
    for w in args.mdir_weights.iter().chain(&args.candidates) {
        w.validate()?;
    }
    design.validate()?;
    Ok(())
}

pub fn run(args: InterimArgs) -> CmdResult {
    let design = read_json::<DesignConfig>(&args.design)?.build()?;
    validate(&args, &design)?;
    let (data, imputation_seed) = load_dataset(&args.ipd, design.t1, args.seed, IMPUTE_INTERIM)?;
    let snap = data.snapshot(design.t1);
    let n_total = args.n_total.unwrap_or(data.len());
    let form: VarianceForm = args.variance_form.into();

    let (statistic, p1) = mdir_pvalue(&snap, &args.mdir_weights, args.bootstrap, args.seed)?;
    let decision = design.decide(p1, None);

    let mut report = InterimReport {
        design: DesignConfig::from(&design),
        seed: args.seed,
        imputation_seed,
        bootstrap_reps: args.bootstrap,
        subjects: data.len(),
        events: snap.event_count(),
        mdir_weights: args.mdir_weights.clone(),
        candidates: args.candidates.clone(),
        statistic,
        p1,
        decision,
        variance_form: form,
        conditional_error: None,
        spline: None,
        cp_report: None,
        selected_weight: None,
        fallback: false,
        mdir_subsets: None,
    };

    let subsets: Vec<(Vec<WeightSpec>, f64)> = if args.all_mdir_subsets {
        mdir_subsets(&args.mdir_weights)
            .into_iter()
            .map(|set| mdir_pvalue(&snap, &set, args.bootstrap, args.seed).map(|(_, p)| (set, p)))
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    let needs_planning = decision == StageDecision::Continue
        || subsets.iter().any(|(_, p)| design.decide(*p, None) == StageDecision::Continue);

    let planning = if needs_planning { Some(plan(&snap, &args)) } else { None };
    let recruitment = TimeDistribution::Uniform { upper: args.accrual };
    let assumptions = planning.as_ref().and_then(|pl| pl.pair.as_ref()).and_then(|pair| {
        PlanningAssumptions::new(&pair.model0, &pair.model1, recruitment, TimeDistribution::Never, args.allocation, n_total)
            .ok()
            .map(|a| a.with_variance_form(form))
    });

    if let Some(pl) = &planning {
        if let Some(pair) = &pl.pair {
            report.spline = Some(SplineSelection {
                p: pair.p(),
                scale: pair.scale(),
                aic_table: pl.aic_table.clone(),
                control: SplineDump::from(&pair.model0),
                treatment: SplineDump::from(&pair.model1),
            });
        }
    }

    if decision == StageDecision::Continue {
        report.conditional_error = Some(design.conditional_error(p1)?);
        let selected = assumptions.as_ref().and_then(|a| select_weight(a, &args.candidates, &design, p1).ok());
        match selected {
            Some(cp) => {
                report.selected_weight = Some(cp.selected_spec());
                report.cp_report = Some(cp);
            }
            None => {
                report.fallback = true;
                report.selected_weight = Some(WeightSpec::LOG_RANK);
            }
        }
    }

    if args.all_mdir_subsets {
        let rows = subsets
            .into_iter()
            .map(|(weights, p)| {
                let decision = design.decide(p, None);
                let conditional_power = match (&assumptions, decision) {
                    (Some(a), StageDecision::Continue) => select_weight(a, &args.candidates, &design, p)
                        .ok()
                        .map(|r| r.candidates.iter().map(|c| c.conditional_power).collect()),
                    _ => None,
                };
                SubsetRow { weights, p1: p, decision, conditional_power }
            })
            .collect();
        report.mdir_subsets = Some(rows);
    }

    write_json(&report, args.out.as_deref())
}
