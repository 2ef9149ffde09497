//! Weight functions and the weighted log-rank statistic.
//!
//! Orientation: the statistic sums, over observed events, the weight times
//! `Y¹/Y - Z`, i.e. the control group's observed minus expected events. Positive
//! values therefore point towards lower hazard in the treatment group, which is the
//! direction of the one-sided alternative.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::survival::{Group, Snapshot, StepFunction};

/// Weight-function descriptor. Textual form: `fh:ρ,γ` or `modest:s*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WeightSpec {
    FlemingHarrington { rho: f64, gamma: f64 },
    Modest { s_star: f64 },
}

impl WeightSpec {
    pub const LOG_RANK: WeightSpec = WeightSpec::FlemingHarrington { rho: 0.0, gamma: 0.0 };

    pub fn fh(rho: f64, gamma: f64) -> Self {
        WeightSpec::FlemingHarrington { rho, gamma }
    }

    pub fn modest(s_star: f64) -> Self {
        WeightSpec::Modest { s_star }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightSpec::FlemingHarrington { rho, gamma } => {
                if !(rho >= 0.0 && gamma >= 0.0 && rho.is_finite() && gamma.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "Fleming-Harrington parameters must be finite and >= 0, got ({rho}, {gamma})"
                    )));
                }
            }
            WeightSpec::Modest { s_star } => {
                if !(s_star >= 0.0 && s_star.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "modest threshold must be finite and >= 0, got {s_star}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Attach the weight to a pooled survival estimate.
    pub fn bind(&self, pooled_km: &StepFunction) -> BoundWeight {
        match *self {
            WeightSpec::FlemingHarrington { rho, gamma } => BoundWeight::Fh { rho, gamma },
            WeightSpec::Modest { s_star } => BoundWeight::Modest { floor: pooled_km.left_limit(s_star) },
        }
    }

    /// Weight as a function of a (left-limit) pooled survival value, with the modest
    /// threshold survival supplied by the caller.
    pub fn from_survival(&self, surv: f64, threshold_surv: f64) -> f64 {
        match *self {
            WeightSpec::FlemingHarrington { rho, gamma } => fh_weight(rho, gamma, surv),
            WeightSpec::Modest { .. } => 1.0 / surv.max(threshold_surv),
        }
    }
}

/// `F^ρ S^γ` with `0⁰ = 1`.
fn fh_weight(rho: f64, gamma: f64, surv: f64) -> f64 {
    let pow = |base: f64, e: f64| if e == 0.0 { 1.0 } else { base.powf(e) };
    pow(1.0 - surv, rho) * pow(surv, gamma)
}

#[derive(Debug, Clone, Copy)]
pub enum BoundWeight {
    Fh { rho: f64, gamma: f64 },
    Modest { floor: f64 },
}

impl BoundWeight {
    /// Weight at an event time whose pooled left-limit survival is `surv_left`.
    pub fn at(&self, surv_left: f64) -> f64 {
        match *self {
            BoundWeight::Fh { rho, gamma } => fh_weight(rho, gamma, surv_left),
            BoundWeight::Modest { floor } => 1.0 / surv_left.max(floor),
        }
    }
}

/// `Q̂(s)` for a weight spec against a pooled Kaplan-Meier curve.
pub fn weight_value(spec: &WeightSpec, pooled_km: &StepFunction, s: f64) -> f64 {
    spec.bind(pooled_km).at(pooled_km.left_limit(s))
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::FlemingHarrington { rho, gamma } => write!(f, "fh:{rho},{gamma}"),
            WeightSpec::Modest { s_star } => write!(f, "modest:{s_star}"),
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("cannot parse weight '{s}' (expected fh:ρ,γ or modest:s*)"));
        let (family, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let spec = match family.trim() {
            "fh" => {
                let (r, g) = args.split_once(',').ok_or_else(bad)?;
                WeightSpec::fh(r.trim().parse().map_err(|_| bad())?, g.trim().parse().map_err(|_| bad())?)
            }
            "modest" => WeightSpec::modest(args.trim().parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<String> for WeightSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<WeightSpec> for String {
    fn from(w: WeightSpec) -> String {
        w.to_string()
    }
}

impl Eq for WeightSpec {}

impl Hash for WeightSpec {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match *self {
            WeightSpec::FlemingHarrington { rho, gamma } => {
                0u8.hash(state);
                rho.to_bits().hash(state);
                gamma.to_bits().hash(state);
            }
            WeightSpec::Modest { s_star } => {
                1u8.hash(state);
                s_star.to_bits().hash(state);
            }
        }
    }
}

/// Reject weight collections containing duplicates.
pub fn check_distinct(specs: &[WeightSpec]) -> Result<()> {
    for (i, a) in specs.iter().enumerate() {
        a.validate()?;
        if specs[..i].contains(a) {
            return Err(Error::InvalidInput(format!("weight {a} listed twice")));
        }
    }
    Ok(())
}

/// One observed event with the risk-set quantities the statistics need.
#[derive(Debug, Clone, Copy)]
pub struct EventRow {
    pub subject: usize,
    pub time: f64,
    pub group: Group,
    pub at_risk: f64,
    pub at_risk_treated: f64,
    /// Pooled Kaplan-Meier left limit at the event time.
    pub surv_left: f64,
}

impl EventRow {
    /// `Y¹/Y - Z`.
    pub fn residual(&self) -> f64 {
        let z = if self.group == Group::Treatment { 1.0 } else { 0.0 };
        self.at_risk_treated / self.at_risk - z
    }

    /// `(Y¹/Y)(1 - Y¹/Y)`.
    pub fn binomial_variance(&self) -> f64 {
        let p = self.at_risk_treated / self.at_risk;
        p * (1.0 - p)
    }
}

/// Per-event table of a snapshot, shared by every weighted statistic computed on it.
#[derive(Debug, Clone)]
pub struct EventTable {
    n_total: usize,
    rows: Vec<EventRow>,
    pooled_km: StepFunction,
}

impl EventTable {
    pub fn new(snap: &Snapshot) -> Self {
        let recs = snap.records();
        let n = recs.len();
        let mut treated_remaining = recs.iter().filter(|r| r.group == Group::Treatment).count();
        let mut rows = Vec::new();
        let mut km_times = Vec::new();
        let mut km_values = Vec::new();
        let mut surv = 1.0;
        let mut i = 0;
        while i < n {
            let t = recs[i].time;
            let at_risk = (n - i) as f64;
            let at_risk_treated = treated_remaining as f64;
            let mut j = i;
            let mut d = 0usize;
            while j < n && recs[j].time == t {
                let r = &recs[j];
                if r.event {
                    d += 1;
                    rows.push(EventRow {
                        subject: r.subject,
                        time: t,
                        group: r.group,
                        at_risk,
                        at_risk_treated,
                        surv_left: surv,
                    });
                }
                if r.group == Group::Treatment {
                    treated_remaining -= 1;
                }
                j += 1;
            }
            if d > 0 {
                surv *= 1.0 - d as f64 / at_risk;
                km_times.push(t);
                km_values.push(surv);
            }
            i = j;
        }
        let pooled_km = StepFunction::new(1.0, km_times, km_values).expect("distinct sorted times");
        Self { n_total: snap.n_total(), rows, pooled_km }
    }

    pub fn rows(&self) -> &[EventRow] {
        &self.rows
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn pooled_km(&self) -> &StepFunction {
        &self.pooled_km
    }

    /// Weight evaluated at each event row.
    pub fn weights(&self, spec: &WeightSpec) -> Vec<f64> {
        let bound = spec.bind(&self.pooled_km);
        self.rows.iter().map(|r| bound.at(r.surv_left)).collect()
    }

    /// Non-standardized statistic `n^{-1/2} Σ Q̂ (Y¹/Y - Z)`.
    pub fn statistic(&self, spec: &WeightSpec) -> f64 {
        let bound = spec.bind(&self.pooled_km);
        let sum: f64 = self.rows.iter().map(|r| bound.at(r.surv_left) * r.residual()).sum();
        sum / (self.n_total as f64).sqrt()
    }

    pub fn variance(&self, spec: &WeightSpec) -> f64 {
        let bound = spec.bind(&self.pooled_km);
        let sum: f64 = self
            .rows
            .iter()
            .map(|r| {
                let q = bound.at(r.surv_left);
                q * q * r.binomial_variance()
            })
            .sum();
        sum / self.n_total as f64
    }

    pub fn statistics(&self, specs: &[WeightSpec]) -> Vec<f64> {
        specs.iter().map(|s| self.statistic(s)).collect()
    }

    pub fn covariance(&self, specs: &[WeightSpec]) -> DMatrix<f64> {
        let m = specs.len();
        let weights: Vec<Vec<f64>> = specs.iter().map(|s| self.weights(s)).collect();
        let mut cov = DMatrix::zeros(m, m);
        for (k, r) in self.rows.iter().enumerate() {
            let v = r.binomial_variance();
            for a in 0..m {
                for b in a..m {
                    cov[(a, b)] += weights[a][k] * weights[b][k] * v;
                }
            }
        }
        let n = self.n_total as f64;
        for a in 0..m {
            for b in a..m {
                cov[(a, b)] /= n;
                cov[(b, a)] = cov[(a, b)];
            }
        }
        cov
    }

    /// Per-event summands `Q̂_ℓ (Y¹/Y - Z)`, row-major with one row per event.
    pub fn contributions(&self, specs: &[WeightSpec]) -> Vec<f64> {
        let bound: Vec<BoundWeight> = specs.iter().map(|s| s.bind(&self.pooled_km)).collect();
        let mut out = Vec::with_capacity(self.rows.len() * specs.len());
        for r in &self.rows {
            let res = r.residual();
            out.extend(bound.iter().map(|b| b.at(r.surv_left) * res));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WlrResult {
    pub statistic: f64,
    pub variance: f64,
    pub standardized: f64,
    pub events_used: usize,
}

impl WlrResult {
    /// One-sided normal p-value `1 - Φ(z)`.
    pub fn p_value(&self) -> f64 {
        normal::sf(self.standardized)
    }
}

fn require_both_groups(snap: &Snapshot) -> Result<()> {
    if snap.has_both_groups() {
        Ok(())
    } else {
        Err(Error::SingleGroup)
    }
}

pub fn wlr_statistic(snap: &Snapshot, spec: &WeightSpec) -> Result<WlrResult> {
    spec.validate()?;
    require_both_groups(snap)?;
    let table = EventTable::new(snap);
    Ok(wlr_from_table(&table, spec))
}

pub fn wlr_from_table(table: &EventTable, spec: &WeightSpec) -> WlrResult {
    let statistic = table.statistic(spec);
    let variance = table.variance(spec);
    let standardized = if variance > 0.0 { statistic / variance.sqrt() } else { 0.0 };
    WlrResult { statistic, variance, standardized, events_used: table.rows.len() }
}

pub fn covariance_matrix(snap: &Snapshot, specs: &[WeightSpec]) -> Result<DMatrix<f64>> {
    if specs.is_empty() {
        return Err(Error::InvalidInput("at least one weight is required".into()));
    }
    for s in specs {
        s.validate()?;
    }
    require_both_groups(snap)?;
    Ok(EventTable::new(snap).covariance(specs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementResult {
    pub z: f64,
    pub p2: f64,
}

/// Standardized increment of the weighted statistic between two calendar times of the
/// same trial. Each snapshot evaluates the weight against its own pooled estimate.
pub fn standardized_increment(snap1: &Snapshot, snap2: &Snapshot, spec: &WeightSpec) -> Result<IncrementResult> {
    spec.validate()?;
    if !(snap1.calendar_time() < snap2.calendar_time()) {
        return Err(Error::InvalidInput(format!(
            "first analysis time {} must precede the second {}",
            snap1.calendar_time(),
            snap2.calendar_time()
        )));
    }
    if snap1.n_total() != snap2.n_total() {
        return Err(Error::InvalidInput("snapshots come from different datasets".into()));
    }
    require_both_groups(snap2)?;
    let first = EventTable::new(snap1);
    let second = EventTable::new(snap2);
    increment_from_tables(&first, &second, spec)
}

pub fn increment_from_tables(first: &EventTable, second: &EventTable, spec: &WeightSpec) -> Result<IncrementResult> {
    let dv = second.variance(spec) - first.variance(spec);
    let scale = second.variance(spec).abs().max(f64::MIN_POSITIVE);
    if !(dv > 1e-12 * scale) {
        return Err(Error::NoSecondStageInformation(dv));
    }
    let z = (second.statistic(spec) - first.statistic(spec)) / dv.sqrt();
    Ok(IncrementResult { z, p2: normal::sf(z) })
}
