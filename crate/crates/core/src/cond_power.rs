//! Planning-time drift and variance of weighted log-rank statistics, conditional power,
//! second-stage weight selection, overall power and effect-size calibration.

use serde::{Deserialize, Serialize};

use crate::curve::{SurvivalCurve, TimeDistribution};
use crate::design::TwoStageDesign;
use crate::error::{Error, Result};
use crate::logrank::WeightSpec;
use crate::normal;
use crate::optim::bisect;
use crate::quadrature::{integrate, Tolerance};
use crate::scenario::ScenarioSpec;
use crate::survival::Group;

/// Form of the variance integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceForm {
    /// `Q² · π₀π₁/(π₀+π₁)² · F_R (1 - F_C) · ((1-r) f₀ + r f₁)`, the limit of the
    /// covariance estimator.
    #[default]
    Consistent,
    /// `Q² · (π₀π₁/(π₀+π₁))² · F_R (1 - F_C) · ((1-r) f₀ + r f₁)`.
    AsPrinted,
}

pub struct PlanningAssumptions<'a> {
    pub survival0: &'a dyn SurvivalCurve,
    pub survival1: &'a dyn SurvivalCurve,
    /// Calendar-time recruitment distribution.
    pub recruitment: TimeDistribution,
    /// Trial-time dropout distribution.
    pub dropout: TimeDistribution,
    /// Probability of allocation to the treatment group.
    pub allocation: f64,
    /// Planned total sample size.
    pub n: usize,
    pub variance_form: VarianceForm,
}

impl<'a> PlanningAssumptions<'a> {
    pub fn new(
        survival0: &'a dyn SurvivalCurve,
        survival1: &'a dyn SurvivalCurve,
        recruitment: TimeDistribution,
        dropout: TimeDistribution,
        allocation: f64,
        n: usize,
    ) -> Result<Self> {
        recruitment.validate()?;
        dropout.validate()?;
        if !(allocation > 0.0 && allocation < 1.0) {
            return Err(Error::InvalidInput(format!("allocation must lie in (0, 1), got {allocation}")));
        }
        if n == 0 {
            return Err(Error::InvalidInput("planned sample size must be positive".into()));
        }
        Ok(Self { survival0, survival1, recruitment, dropout, allocation, n, variance_form: VarianceForm::default() })
    }

    pub fn with_variance_form(mut self, form: VarianceForm) -> Self {
        self.variance_form = form;
        self
    }

    fn curve(&self, k: Group) -> &dyn SurvivalCurve {
        match k {
            Group::Control => self.survival0,
            Group::Treatment => self.survival1,
        }
    }

    fn share(&self, k: Group) -> f64 {
        match k {
            Group::Control => 1.0 - self.allocation,
            Group::Treatment => self.allocation,
        }
    }

    /// `F_R((t - s)₊) · (1 - F_C(s))`.
    fn observable(&self, t: f64, s: f64) -> f64 {
        self.recruitment.cdf((t - s).max(0.0)) * (1.0 - self.dropout.cdf(s))
    }

    /// `π̃ₖ(t, s)`.
    pub fn at_risk_prob(&self, k: Group, t: f64, s: f64) -> f64 {
        self.share(k) * self.observable(t, s) * self.curve(k).survival(s)
    }

    /// `S̃ = (1 - r) S̃₀ + r S̃₁`.
    pub fn pooled_survival(&self, s: f64) -> f64 {
        (1.0 - self.allocation) * self.survival0.survival(s) + self.allocation * self.survival1.survival(s)
    }

    /// Large-sample limit `Q̃(s)` of a weight.
    pub fn weight_limit(&self, spec: &WeightSpec, s: f64) -> f64 {
        let surv = self.pooled_survival(s);
        let threshold = match *spec {
            WeightSpec::Modest { s_star } => self.pooled_survival(s_star),
            WeightSpec::FlemingHarrington { .. } => 0.0,
        };
        spec.from_survival(surv, threshold)
    }

    pub fn drift_integrand(&self, spec: &WeightSpec, t: f64, s: f64) -> f64 {
        let a0 = (1.0 - self.allocation) * self.survival0.survival(s);
        let a1 = self.allocation * self.survival1.survival(s);
        let h0 = self.survival0.hazard(s);
        let h1 = self.survival1.hazard(s);
        if a0 + a1 <= 0.0 || h0 == h1 {
            return 0.0;
        }
        let g = self.observable(t, s);
        self.weight_limit(spec, s) * g * a0 * a1 / (a0 + a1) * (h0 - h1)
    }

    pub fn variance_integrand(&self, spec: &WeightSpec, t: f64, s: f64) -> f64 {
        let a0 = (1.0 - self.allocation) * self.survival0.survival(s);
        let a1 = self.allocation * self.survival1.survival(s);
        if a0 + a1 <= 0.0 {
            return 0.0;
        }
        let g = self.observable(t, s);
        let q = self.weight_limit(spec, s);
        let mix = (1.0 - self.allocation) * self.survival0.density(s) + self.allocation * self.survival1.density(s);
        let ratio = a0 * a1 / (a0 + a1);
        let core = match self.variance_form {
            VarianceForm::Consistent => ratio / (a0 + a1),
            VarianceForm::AsPrinted => g * ratio * g * ratio,
        };
        q * q * core * g * mix
    }

    fn breakpoints(&self, spec: &WeightSpec, t: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self.recruitment.kinks().into_iter().map(|k| t - k).collect();
        pts.extend(self.dropout.kinks());
        pts.extend(self.survival0.kinks());
        pts.extend(self.survival1.kinks());
        if let WeightSpec::Modest { s_star } = *spec {
            pts.push(s_star);
        }
        pts.retain(|&p| p > 0.0 && p < t);
        pts
    }

    fn integrate_to(&self, t: f64, upper: f64, spec: &WeightSpec, f: impl Fn(f64) -> f64) -> Result<f64> {
        if upper <= 0.0 {
            return Ok(0.0);
        }
        let mut breaks = self.breakpoints(spec, t);
        breaks.retain(|&p| p < upper);
        integrate(f, 0.0, upper, &breaks, Tolerance { abs: 1e-14, rel: 1e-8 })
    }

    /// `ξ̃(t)`.
    pub fn drift(&self, spec: &WeightSpec, t: f64) -> Result<f64> {
        self.integrate_to(t, t, spec, |s| self.drift_integrand(spec, t, s))
    }

    /// `ξ̃(t)` with the integral truncated at `upper ≤ t`.
    pub fn drift_partial(&self, spec: &WeightSpec, t: f64, upper: f64) -> Result<f64> {
        self.integrate_to(t, upper.min(t), spec, |s| self.drift_integrand(spec, t, s))
    }

    /// `σ̃²(t)`.
    pub fn variance(&self, spec: &WeightSpec, t: f64) -> Result<f64> {
        self.integrate_to(t, t, spec, |s| self.variance_integrand(spec, t, s))
    }

    /// Mean of the standardized second-stage increment, `Δξ √n / Δσ`.
    pub fn increment_mean(&self, spec: &WeightSpec, t1: f64, t2: f64) -> Result<(f64, f64, f64)> {
        let dxi = self.drift(spec, t2)? - self.drift(spec, t1)?;
        let dvar = self.variance(spec, t2)? - self.variance(spec, t1)?;
        if !(dvar > 0.0) {
            return Err(Error::NoSecondStageInformation(dvar));
        }
        let sd = dvar.sqrt();
        Ok((dxi, sd, dxi * (self.n as f64).sqrt() / sd))
    }
}

/// Conditional power for one candidate weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateCp {
    pub spec: WeightSpec,
    pub drift_increment: f64,
    pub sd_increment: f64,
    pub conditional_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpReport {
    pub candidates: Vec<CandidateCp>,
    pub selected: usize,
    pub conditional_error_used: f64,
}

impl CpReport {
    pub fn selected_spec(&self) -> WeightSpec {
        self.candidates[self.selected].spec
    }
}

/// `1 - Φ(Φ⁻¹(1 - α̃₂) - μ)`.
pub fn conditional_power_from(cond_error: f64, mean: f64) -> f64 {
    if cond_error <= 0.0 {
        return 0.0;
    }
    if cond_error >= 1.0 {
        return 1.0;
    }
    normal::sf(normal::quantile(1.0 - cond_error) - mean)
}

pub fn conditional_power(
    assumptions: &PlanningAssumptions<'_>,
    spec: &WeightSpec,
    design: &TwoStageDesign,
    p1: f64,
) -> Result<CandidateCp> {
    let cond_error = design.conditional_error(p1)?;
    candidate(assumptions, spec, design, cond_error)
}

fn candidate(a: &PlanningAssumptions<'_>, spec: &WeightSpec, design: &TwoStageDesign, cond_error: f64) -> Result<CandidateCp> {
    spec.validate()?;
    let (dxi, sd, mean) = a.increment_mean(spec, design.t1, design.t2)?;
    Ok(CandidateCp {
        spec: *spec,
        drift_increment: dxi,
        sd_increment: sd,
        conditional_power: conditional_power_from(cond_error, mean),
    })
}

/// Evaluate every candidate and select the one with the largest conditional power;
/// ties go to the earliest candidate.
pub fn select_weight(
    assumptions: &PlanningAssumptions<'_>,
    candidates: &[WeightSpec],
    design: &TwoStageDesign,
    p1: f64,
) -> Result<CpReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("at least one candidate weight is required".into()));
    }
    let cond_error = design.conditional_error(p1)?;
    let evaluated = candidates
        .iter()
        .map(|spec| candidate(assumptions, spec, design, cond_error))
        .collect::<Result<Vec<_>>>()?;
    let mut selected = 0;
    for (i, c) in evaluated.iter().enumerate() {
        if c.conditional_power > evaluated[selected].conditional_power {
            selected = i;
        }
    }
    Ok(CpReport { candidates: evaluated, selected, conditional_error_used: cond_error })
}

/// Probability that the two-stage test with a fixed weight rejects, with independent
/// Gaussian stage-wise statistics whose means come from the planning integrals.
pub fn overall_power(assumptions: &PlanningAssumptions<'_>, design: &TwoStageDesign, spec: &WeightSpec) -> Result<f64> {
    let xi1 = assumptions.drift(spec, design.t1)?;
    let var1 = assumptions.variance(spec, design.t1)?;
    let mu1 = if var1 > 0.0 { xi1 * (assumptions.n as f64).sqrt() / var1.sqrt() } else { 0.0 };
    let (_, _, mu2) = assumptions.increment_mean(spec, design.t1, design.t2)?;
    gaussian_power(design, mu1, mu2)
}

/// Rejection probability of the design when `Z₁ ~ N(μ₁, 1)` and `Z₂ ~ N(μ₂, 1)` are the
/// independent stage-wise z-statistics.
pub fn gaussian_power(design: &TwoStageDesign, mu1: f64, mu2: f64) -> Result<f64> {
    let b1 = normal::quantile(1.0 - design.alpha1);
    let early = normal::sf(b1 - mu1);
    let z_futility = if design.has_futility_bound() { normal::quantile(1.0 - design.alpha0) } else { f64::NEG_INFINITY };
    let lower = z_futility.max(mu1 - 40.0);
    let upper = b1.min(mu1 + 40.0);
    if upper <= lower {
        return Ok(early);
    }
    let integrand = |z: f64| {
        let ce = design.combination.conditional_error(normal::sf(z), design.c);
        normal::pdf(z - mu1) * conditional_power_from(ce, mu2)
    };
    let cont = integrate(integrand, lower, upper, &[], Tolerance { abs: 1e-13, rel: 1e-10 })?;
    Ok(early + cont)
}

/// Find `θ ≤ 0` with `power(θ) = target`, assuming power increases as `θ` decreases.
pub fn calibrate(mut power: impl FnMut(f64) -> Result<f64>, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(format!("target power must lie in (0, 1), got {target}")));
    }
    let at_zero = power(0.0)?;
    if at_zero >= target {
        return Err(Error::Bracketing(format!("power {at_zero} at θ = 0 already reaches the target")));
    }
    let mut hi = -0.05;
    loop {
        if power(hi)? >= target {
            break;
        }
        hi *= 2.0;
        if hi < -100.0 {
            return Err(Error::Bracketing("target power not reached for θ ≥ -100".into()));
        }
    }
    let mut failure = None;
    let theta = bisect(
        |th| match power(th) {
            Ok(p) => p - target,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        hi,
        hi / 2.0,
        1e-12,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    theta
}

/// Planning assumptions of a synthetic scenario: exponential control, the scenario's
/// treatment law, uniform recruitment, balanced allocation.
pub fn scenario_power(scenario: &ScenarioSpec, design: &TwoStageDesign, spec: &WeightSpec, form: VarianceForm) -> Result<f64> {
    let c0 = scenario.control_curve();
    let c1 = scenario.treatment_curve();
    let a = PlanningAssumptions::new(&c0, &c1, scenario.recruitment(), scenario.dropout, 0.5, 2 * scenario.n_per_group)?
        .with_variance_form(form);
    overall_power(&a, design, spec)
}

/// `θ₀` at which the two-stage test with weight `spec` reaches `target` overall power
/// in the scenario family indexed by `θ`.
pub fn calibrate_theta(
    scenario: &ScenarioSpec,
    design: &TwoStageDesign,
    spec: &WeightSpec,
    target: f64,
    form: VarianceForm,
) -> Result<f64> {
    calibrate(|theta| scenario_power(&scenario.with_theta(theta), design, spec, form), target)
}
