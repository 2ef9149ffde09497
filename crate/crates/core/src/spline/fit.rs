use std::cmp::Ordering;

use super::basis::{basis, basis_derivative, place_knots, KnotVector};
use super::model::{monotone_on_line, GroupExtrapolation, SplineModel, SplineScale};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::survival::{Group, Snapshot};

/// Observations of one group, held in canonical `(time, event)` order so fits do not
/// depend on input order.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineData {
    obs: Vec<(f64, bool)>,
}

impl SplineData {
    pub fn new(mut obs: Vec<(f64, bool)>) -> Result<Self> {
        if obs.iter().any(|&(t, _)| !(t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidInput("observation times must be finite and nonnegative".into()));
        }
        obs.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        Ok(Self { obs })
    }

    pub fn from_snapshot(snap: &Snapshot, group: Group) -> Self {
        Self::new(snap.group_observations(group)).expect("snapshot times are valid")
    }

    pub fn observations(&self) -> &[(f64, bool)] {
        &self.obs
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.obs.iter().filter(|o| o.1).map(|o| o.0).collect()
    }
}

/// `Σ_events ln f(X) + Σ_censored ln S(X)`; `-∞` if the spline is not increasing at an
/// event time. Zero-length follow-up contributes nothing.
pub fn log_likelihood(model: &SplineModel, data: &SplineData) -> f64 {
    let prepared = Prepared::new(data, &model.knots);
    prepared.loglik(model.scale, &model.phi)
}

struct Prepared {
    d: usize,
    /// Basis rows for every record with positive time.
    rows: Vec<f64>,
    /// Derivative rows for events.
    drows: Vec<f64>,
    log_t: Vec<f64>,
    event: Vec<bool>,
}

impl Prepared {
    fn new(data: &SplineData, knots: &KnotVector) -> Self {
        let d = knots.p() + 2;
        let mut rows = Vec::new();
        let mut drows = Vec::new();
        let mut log_t = Vec::new();
        let mut event = Vec::new();
        for &(t, e) in &data.obs {
            if t <= 0.0 {
                continue;
            }
            let x = t.ln();
            rows.extend(basis(x, knots));
            if e {
                drows.extend(basis_derivative(x, knots));
            }
            log_t.push(x);
            event.push(e);
        }
        Self { d, rows, drows, log_t, event }
    }

    fn loglik(&self, scale: SplineScale, phi: &[f64]) -> f64 {
        let d = self.d;
        let mut total = 0.0;
        let mut k = 0;
        for (i, (&x, &e)) in self.log_t.iter().zip(&self.event).enumerate() {
            let eta: f64 = self.rows[i * d..(i + 1) * d].iter().zip(phi).map(|(a, b)| a * b).sum();
            if e {
                let dp: f64 = self.drows[k * d..(k + 1) * d].iter().zip(phi).map(|(a, b)| a * b).sum();
                k += 1;
                if !(dp > 0.0) {
                    return f64::NEG_INFINITY;
                }
                total += scale.ln_density_core(eta) + dp.ln() - x;
            } else {
                total += scale.ln_survival(eta);
            }
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub optimizer: NelderMeadConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { optimizer: NelderMeadConfig::default() }
    }
}

/// Least-squares line through `g(exp(-Â(t)))` against `log t` at the distinct event
/// times, with `Â` the Nelson-Aalen estimate.
fn initial_p0(data: &SplineData, scale: SplineScale) -> [f64; 2] {
    let obs = &data.obs;
    let n = obs.len();
    let mut cumhaz = 0.0;
    let mut pts = Vec::new();
    let mut i = 0;
    while i < n {
        let t = obs[i].0;
        let at_risk = (n - i) as f64;
        let mut j = i;
        let mut d = 0usize;
        while j < n && obs[j].0 == t {
            d += usize::from(obs[j].1);
            j += 1;
        }
        if d > 0 && t > 0.0 {
            cumhaz += d as f64 / at_risk;
            let y = scale.link((-cumhaz).exp());
            if y.is_finite() {
                pts.push((t.ln(), y));
            }
        }
        i = j;
    }
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return [0.0, 1.0];
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = if sxx > 0.0 && sxy > 0.0 { sxy / sxx } else { 1.0 };
    [my - slope * mx, slope]
}

fn fit_from(data: &SplineData, scale: SplineScale, knots: KnotVector, start: &[f64], cfg: &FitConfig) -> Result<SplineModel> {
    let prepared = Prepared::new(data, &knots);
    let objective = |phi: &[f64]| {
        if !monotone_on_line(&knots, phi) {
            return f64::INFINITY;
        }
        -prepared.loglik(scale, phi)
    };
    let min = nelder_mead(objective, start, &cfg.optimizer);
    if !min.f.is_finite() {
        return Err(Error::FitFailure(format!(
            "no finite likelihood found for the {scale}-scale spline with {} internal knots",
            knots.p()
        )));
    }
    SplineModel::new(scale, knots, min.x, -min.f)
}

/// Maximum-likelihood fit of one Royston-Parmar model. Models with internal knots start
/// from the fitted knot-free model on the same scale.
pub fn fit(data: &SplineData, scale: SplineScale, p: usize, cfg: &FitConfig) -> Result<SplineModel> {
    let events = data.event_times();
    let knots0 = place_knots(&events, 0)?;
    let base = fit_from(data, scale, knots0, &initial_p0(data, scale), cfg)?;
    if p == 0 {
        return Ok(base);
    }
    extend(data, &base, p, cfg)
}

fn extend(data: &SplineData, base: &SplineModel, p: usize, cfg: &FitConfig) -> Result<SplineModel> {
    let knots = place_knots(&data.event_times(), p)?;
    let mut start = base.phi.clone();
    start.resize(p + 2, 0.0);
    fit_from(data, base.scale, knots, &start, cfg)
}

#[derive(Debug)]
pub struct GridPoint {
    pub p: usize,
    pub scale: SplineScale,
    pub model: Result<SplineModel>,
}

pub type FittedGrid = Vec<GridPoint>;

/// Fit every `(p, scale)` combination, in `p`-major order.
pub fn fit_grid(data: &SplineData, ps: &[usize], scales: &[SplineScale], cfg: &FitConfig) -> FittedGrid {
    let bases: Vec<(SplineScale, Result<SplineModel>)> = scales
        .iter()
        .map(|&scale| {
            let base = place_knots(&data.event_times(), 0)
                .and_then(|k| fit_from(data, scale, k, &initial_p0(data, scale), cfg));
            (scale, base)
        })
        .collect();
    let mut out = Vec::new();
    for &p in ps {
        for (scale, base) in &bases {
            let model = match base {
                Err(e) => Err(Error::FitFailure(e.to_string())),
                Ok(b) if p == 0 => Ok(b.clone()),
                Ok(b) => extend(data, b, p, cfg),
            };
            out.push(GridPoint { p, scale: *scale, model });
        }
    }
    out
}

/// Fit the grid separately in both groups of a snapshot and pair the results.
pub fn fit_both_groups(
    snap: &Snapshot,
    ps: &[usize],
    scales: &[SplineScale],
    cfg: &FitConfig,
) -> Vec<(usize, SplineScale, Result<GroupExtrapolation>)> {
    let g0 = fit_grid(&SplineData::from_snapshot(snap, Group::Control), ps, scales, cfg);
    let g1 = fit_grid(&SplineData::from_snapshot(snap, Group::Treatment), ps, scales, cfg);
    g0.into_iter()
        .zip(g1)
        .map(|(a, b)| {
            let pair = match (a.model, b.model) {
                (Ok(model0), Ok(model1)) => Ok(GroupExtrapolation { model0, model1 }),
                (Err(e), _) | (_, Err(e)) => Err(e),
            };
            (a.p, a.scale, pair)
        })
        .collect()
}

pub fn aic(model: &SplineModel) -> f64 {
    model.aic()
}

pub fn combined_aic(pair: &GroupExtrapolation) -> f64 {
    pair.combined_aic()
}

/// Index of the smallest AIC; ties go to fewer knots, then hazard < odds < normal.
pub fn argmin_aic(entries: &[(usize, SplineScale, f64)]) -> Option<usize> {
    (0..entries.len())
        .filter(|&i| entries[i].2.is_finite())
        .min_by(|&i, &j| {
            let (a, b) = (entries[i], entries[j]);
            a.2.partial_cmp(&b.2)
                .unwrap_or(Ordering::Equal)
                .then(a.0.cmp(&b.0))
                .then(a.1.cmp(&b.1))
        })
}

pub fn select_model(candidates: &[GroupExtrapolation]) -> Result<GroupExtrapolation> {
    let entries: Vec<_> = candidates.iter().map(|c| (c.p(), c.scale(), c.combined_aic())).collect();
    argmin_aic(&entries)
        .map(|i| candidates[i].clone())
        .ok_or_else(|| Error::FitFailure("no spline model could be fitted".into()))
}
