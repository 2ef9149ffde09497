use std::cell::{OnceCell, RefCell};
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::procedure::{FirstStage, Procedure, SecondStage, Stages};
use crate::cond_power::{conditional_power_from, PlanningAssumptions, VarianceForm};
use crate::curve::TimeDistribution;
use crate::design::{StageDecision, TwoStageDesign};
use crate::error::Result;
use crate::logrank::{increment_from_tables, wlr_from_table, EventTable, WeightSpec};
use crate::mdir::{MdirTest, DEFAULT_PINV_TOL};
use crate::rng;
use crate::spline::{fit_both_groups, select_model, FitConfig, GroupExtrapolation, SplineScale};
use crate::survival::{Snapshot, SurvivalDataset};

/// Everything a trial needs besides the data and the procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSettings {
    pub design: TwoStageDesign,
    pub bootstrap_reps: usize,
    pub spline_ps: Vec<usize>,
    pub spline_scales: Vec<SplineScale>,
    pub fit: FitConfig,
    /// Design-time recruitment assumption used for planning at the interim.
    pub recruitment: TimeDistribution,
    pub dropout: TimeDistribution,
    pub variance_form: VarianceForm,
}

impl TrialSettings {
    /// Nine spline models, 1,000 bootstrap draws, uniform recruitment over `accrual`.
    pub fn new(design: TwoStageDesign, accrual: f64) -> Self {
        Self {
            design,
            bootstrap_reps: 1000,
            spline_ps: vec![0, 1, 2],
            spline_scales: SplineScale::ALL.to_vec(),
            fit: FitConfig::default(),
            recruitment: TimeDistribution::Uniform { upper: accrual },
            dropout: TimeDistribution::Never,
            variance_form: VarianceForm::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub decision: StageDecision,
    /// First-stage p-value, or the only p-value of a one-stage procedure.
    pub p1: f64,
    pub p2: Option<f64>,
    pub selected_weight: Option<WeightSpec>,
    pub selected_spline: Option<(usize, SplineScale)>,
    pub combined_p: Option<f64>,
    /// Set when the spline or conditional-power step failed and the standard log-rank
    /// weight was used instead.
    pub fallback: bool,
}

impl TrialResult {
    pub fn reached_second_stage(&self) -> bool {
        self.p2.is_some()
    }
}

#[derive(Debug, Clone)]
struct SplineChoice {
    pair: Option<GroupExtrapolation>,
}

/// One simulated dataset evaluated under several procedures. Snapshots, event tables,
/// mdir tests, spline fits and planning integrals are computed once and shared.
pub struct ReplicateRunner<'a> {
    settings: &'a TrialSettings,
    n_total: usize,
    seed: u64,
    snap1: Snapshot,
    table1: EventTable,
    table2: EventTable,
    both1: bool,
    both2: bool,
    mdir: RefCell<HashMap<(u8, Vec<WeightSpec>), f64>>,
    spline: OnceCell<SplineChoice>,
    means: RefCell<HashMap<WeightSpec, Option<f64>>>,
}

impl<'a> ReplicateRunner<'a> {
    pub fn new(dataset: &SurvivalDataset, settings: &'a TrialSettings, seed: u64) -> Self {
        let snap1 = dataset.snapshot(settings.design.t1);
        let snap2 = dataset.snapshot(settings.design.t2);
        Self {
            settings,
            n_total: dataset.len(),
            seed,
            table1: EventTable::new(&snap1),
            table2: EventTable::new(&snap2),
            both1: snap1.has_both_groups(),
            both2: snap2.has_both_groups(),
            snap1,
            mdir: RefCell::new(HashMap::new()),
            spline: OnceCell::new(),
            means: RefCell::new(HashMap::new()),
        }
    }

    /// Bootstrap p-value of the mdir test at stage 1 or 2. The bootstrap seed depends on
    /// the replicate seed, the stage and the weight set only.
    fn mdir_p(&self, stage: u8, weights: &[WeightSpec]) -> Result<f64> {
        let key = (stage, weights.to_vec());
        if let Some(&p) = self.mdir.borrow().get(&key) {
            return Ok(p);
        }
        let (table, both) = if stage == 1 { (&self.table1, self.both1) } else { (&self.table2, self.both2) };
        let p = if both {
            let label: String = weights.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(";");
            let seed = rng::derive_seed(self.seed, &[stage as u64, rng::label_hash(&label)]);
            MdirTest::from_table(table, weights, DEFAULT_PINV_TOL)?
                .bootstrap_pvalue(self.settings.bootstrap_reps, seed)?
                .p_value
        } else {
            1.0
        };
        self.mdir.borrow_mut().insert(key, p);
        Ok(p)
    }

    fn single_p(&self, weight: &WeightSpec) -> f64 {
        if !self.both1 {
            return 1.0;
        }
        wlr_from_table(&self.table1, weight).p_value()
    }

    fn spline_choice(&self) -> &SplineChoice {
        self.spline.get_or_init(|| {
            let s = self.settings;
            let fits = fit_both_groups(&self.snap1, &s.spline_ps, &s.spline_scales, &s.fit);
            let ok: Vec<GroupExtrapolation> = fits.into_iter().filter_map(|(_, _, r)| r.ok()).collect();
            SplineChoice { pair: select_model(&ok).ok() }
        })
    }

    /// Mean of the standardized increment under the fitted spline models.
    fn planning_mean(&self, pair: &GroupExtrapolation, weight: &WeightSpec) -> Option<f64> {
        if let Some(m) = self.means.borrow().get(weight) {
            return *m;
        }
        let s = self.settings;
        let mean = PlanningAssumptions::new(&pair.model0, &pair.model1, s.recruitment, s.dropout, 0.5, self.n_total)
            .map(|a| a.with_variance_form(s.variance_form))
            .and_then(|a| a.increment_mean(weight, s.design.t1, s.design.t2))
            .ok()
            .map(|(_, _, m)| m)
            .filter(|m| m.is_finite());
        self.means.borrow_mut().insert(*weight, mean);
        mean
    }

    pub fn run(&self, procedure: &Procedure) -> Result<TrialResult> {
        let design = &self.settings.design;
        let (first, second) = match &procedure.stages {
            Stages::OneStage(weights) => {
                let p = self.mdir_p(2, weights)?;
                let decision = if p <= design.alpha { StageDecision::RejectAtFinal } else { StageDecision::AcceptAtFinal };
                return Ok(TrialResult {
                    decision,
                    p1: p,
                    p2: None,
                    selected_weight: None,
                    selected_spline: None,
                    combined_p: None,
                    fallback: false,
                });
            }
            Stages::TwoStage { first, second } => (first, second),
        };
        let p1 = match first {
            FirstStage::Mdir(weights) => self.mdir_p(1, weights)?,
            FirstStage::Single(w) => self.single_p(w),
        };
        let mut result = TrialResult {
            decision: design.decide(p1, None),
            p1,
            p2: None,
            selected_weight: None,
            selected_spline: None,
            combined_p: None,
            fallback: false,
        };
        if result.decision != StageDecision::Continue {
            return Ok(result);
        }
        let weight = match second {
            SecondStage::Fixed(w) => *w,
            SecondStage::Adaptive(candidates) => {
                let cond_error = design.conditional_error(p1)?;
                let choice = self.spline_choice();
                match &choice.pair {
                    Some(pair) => {
                        result.selected_spline = Some((pair.p(), pair.scale()));
                        let mut best: Option<(f64, WeightSpec)> = None;
                        for w in candidates {
                            if let Some(mean) = self.planning_mean(pair, w) {
                                let cp = conditional_power_from(cond_error, mean);
                                if best.map_or(true, |(b, _)| cp > b) {
                                    best = Some((cp, *w));
                                }
                            }
                        }
                        match best {
                            Some((_, w)) => w,
                            None => {
                                result.fallback = true;
                                WeightSpec::LOG_RANK
                            }
                        }
                    }
                    None => {
                        result.fallback = true;
                        WeightSpec::LOG_RANK
                    }
                }
            }
        };
        result.selected_weight = Some(weight);
        // Without a second-stage increment the final test cannot reject.
        let p2 = increment_from_tables(&self.table1, &self.table2, &weight).map(|r| r.p2).unwrap_or(1.0);
        let p2 = if self.both2 { p2 } else { 1.0 };
        result.p2 = Some(p2);
        result.combined_p = Some(design.combine(p1, p2));
        result.decision = design.decide(p1, Some(p2));
        Ok(result)
    }
}

/// Run one procedure on one dataset.
pub fn run_two_stage_trial(
    dataset: &SurvivalDataset,
    settings: &TrialSettings,
    procedure: &Procedure,
    seed: u64,
) -> Result<TrialResult> {
    ReplicateRunner::new(dataset, settings, seed).run(procedure)
}
