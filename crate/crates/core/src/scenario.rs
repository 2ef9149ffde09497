//! Synthetic two-arm trials in which a chosen Fleming-Harrington test is locally most
//! powerful: the treatment log hazard ratio is `θ · F₀(s)^ρ* S₀(s)^γ*` against an
//! exponential control arm.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{Exponential, SurvivalCurve, TimeDistribution};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_15;
use crate::survival::{Group, Subject, SurvivalDataset};

/// Annual event rate of 30% in the control arm.
pub fn default_control_rate() -> f64 {
    -(0.7f64).ln()
}

const GRID_CELLS: usize = 4096;
/// The grid ends where control survival reaches this value.
const TAIL_SURVIVAL: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub control_rate: f64,
    pub rho_star: f64,
    pub gamma_star: f64,
    pub theta: f64,
    /// Recruitment is uniform on `[0, accrual]`.
    pub accrual: f64,
    pub t1: f64,
    pub t2: f64,
    pub n_per_group: usize,
    pub dropout: TimeDistribution,
}

impl ScenarioSpec {
    /// Exponential control with a 30% annual event rate, recruitment over six years,
    /// analyses after five and eight years and no dropout.
    pub fn standard(rho_star: f64, gamma_star: f64, theta: f64, n_per_group: usize) -> Self {
        Self {
            control_rate: default_control_rate(),
            rho_star,
            gamma_star,
            theta,
            accrual: 6.0,
            t1: 5.0,
            t2: 8.0,
            n_per_group,
            dropout: TimeDistribution::Never,
        }
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.control_rate > 0.0 && self.control_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("control_rate must be positive, got {}", self.control_rate)));
        }
        if !(self.theta <= 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidInput(format!("theta must be finite and <= 0, got {}", self.theta)));
        }
        if !(self.rho_star >= 0.0 && self.gamma_star >= 0.0) {
            return Err(Error::InvalidInput("rho_star and gamma_star must be nonnegative".into()));
        }
        if !(self.accrual > 0.0 && self.accrual.is_finite()) {
            return Err(Error::InvalidInput(format!("accrual must be positive, got {}", self.accrual)));
        }
        if !(self.t1 > 0.0 && self.t1 < self.t2) {
            return Err(Error::InvalidInput(format!("need 0 < t1 < t2, got {} and {}", self.t1, self.t2)));
        }
        self.dropout.validate()
    }

    pub fn recruitment(&self) -> TimeDistribution {
        TimeDistribution::Uniform { upper: self.accrual }
    }

    pub fn control_curve(&self) -> Exponential {
        Exponential::new(self.control_rate)
    }

    pub fn treatment_curve(&self) -> ScenarioCurve {
        ScenarioCurve::new(self.control_rate, self.rho_star, self.gamma_star, self.theta)
    }

    /// Hazard ratio `λ₁(s) / λ₀(s)`.
    pub fn hazard_ratio(&self, s: f64) -> f64 {
        hazard_ratio(self.control_rate, self.rho_star, self.gamma_star, self.theta, s)
    }
}

/// `exp(θ F₀(s)^ρ* S₀(s)^γ*)` with `0⁰ = 1`.
pub fn hazard_ratio(control_rate: f64, rho: f64, gamma: f64, theta: f64, s: f64) -> f64 {
    if theta == 0.0 {
        return 1.0;
    }
    let surv = (-control_rate * s.max(0.0)).exp();
    let cdf = -(-control_rate * s.max(0.0)).exp_m1();
    let pow = |b: f64, e: f64| if e == 0.0 { 1.0 } else { b.powf(e) };
    (theta * pow(cdf, rho) * pow(surv, gamma)).exp()
}

/// `∫₀ˢ h` on geometrically shrinking pieces toward the origin, where `F₀^ρ` behaves
/// like `u^ρ`.
fn from_origin(h: impl Fn(f64) -> f64, s: f64) -> f64 {
    let mut total = 0.0;
    let mut hi = s;
    for _ in 0..48 {
        let lo = 0.5 * hi;
        total += gauss_legendre_15(&h, lo, hi);
        hi = lo;
    }
    total + gauss_legendre_15(&h, 0.0, hi)
}

/// Treatment-arm survival law with tabulated cumulative hazard.
#[derive(Debug, Clone)]
pub struct ScenarioCurve {
    control_rate: f64,
    rho: f64,
    gamma: f64,
    theta: f64,
    step: f64,
    cumhaz: Vec<f64>,
    tail_hazard: f64,
}

impl ScenarioCurve {
    pub fn new(control_rate: f64, rho: f64, gamma: f64, theta: f64) -> Self {
        let s_max = -TAIL_SURVIVAL.ln() / control_rate;
        let step = s_max / GRID_CELLS as f64;
        let haz = |s: f64| control_rate * hazard_ratio(control_rate, rho, gamma, theta, s);
        let mut cumhaz = Vec::with_capacity(GRID_CELLS + 1);
        let mut acc = 0.0;
        cumhaz.push(0.0);
        for i in 0..GRID_CELLS {
            let a = i as f64 * step;
            acc += if i == 0 { from_origin(haz, step) } else { gauss_legendre_15(haz, a, a + step) };
            cumhaz.push(acc);
        }
        let tail_hazard = haz(s_max);
        Self { control_rate, rho, gamma, theta, step, cumhaz, tail_hazard }
    }

    fn s_max(&self) -> f64 {
        self.step * GRID_CELLS as f64
    }

    fn exact_hazard(&self, s: f64) -> f64 {
        self.control_rate * hazard_ratio(self.control_rate, self.rho, self.gamma, self.theta, s)
    }

    /// Cumulative hazard: tabulated value at the cell start plus a 15-point
    /// Gauss-Legendre integral over the partial cell; linear beyond the grid.
    pub fn cumulative_hazard(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= self.s_max() {
            return self.cumhaz[GRID_CELLS] + self.tail_hazard * (s - self.s_max());
        }
        let i = ((s / self.step).floor() as usize).min(GRID_CELLS - 1);
        let a = i as f64 * self.step;
        if s == a {
            return self.cumhaz[i];
        }
        if i == 0 {
            return from_origin(|u| self.exact_hazard(u), s);
        }
        self.cumhaz[i] + gauss_legendre_15(|u| self.exact_hazard(u), a, s)
    }

    /// Trial time at which the cumulative hazard reaches `target`.
    pub fn inverse_cumulative_hazard(&self, target: f64) -> f64 {
        if target <= 0.0 {
            return 0.0;
        }
        let top = self.cumhaz[GRID_CELLS];
        if target >= top {
            return self.s_max() + (target - top) / self.tail_hazard;
        }
        let i = self.cumhaz.partition_point(|&c| c <= target).saturating_sub(1).min(GRID_CELLS - 1);
        let (mut lo, mut hi) = (i as f64 * self.step, (i + 1) as f64 * self.step);
        let mut s = lo + (target - self.cumhaz[i]) / (self.cumhaz[i + 1] - self.cumhaz[i]) * self.step;
        for _ in 0..60 {
            let f = self.cumulative_hazard(s) - target;
            if f.abs() <= 1e-14 * target.max(1.0) {
                break;
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let slope = self.exact_hazard(s);
            let newton = s - f / slope;
            s = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 * hi {
                break;
            }
        }
        s
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e = -(1.0 - rng.gen::<f64>()).ln();
        self.inverse_cumulative_hazard(e)
    }
}

impl SurvivalCurve for ScenarioCurve {
    fn survival(&self, s: f64) -> f64 {
        (-self.cumulative_hazard(s)).exp()
    }

    fn density(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        self.hazard(s) * self.survival(s)
    }

    fn hazard(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        if s >= self.s_max() {
            return self.tail_hazard;
        }
        self.exact_hazard(s)
    }
}

/// Draw one trial: the first `n_per_group` subjects are controls. Each subject consumes
/// one uniform for the entry time, one for the event time and one for dropout.
pub fn sample_trial<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<SurvivalDataset> {
    let curve = spec.treatment_curve();
    sample_trial_with(spec, &curve, rng)
}

/// As [`sample_trial`] with a prebuilt treatment curve.
pub fn sample_trial_with<R: Rng + ?Sized>(spec: &ScenarioSpec, curve: &ScenarioCurve, rng: &mut R) -> Result<SurvivalDataset> {
    spec.validate()?;
    if spec.n_per_group == 0 {
        return Err(Error::InvalidInput("n_per_group must be positive".into()));
    }
    let mut subjects = Vec::with_capacity(2 * spec.n_per_group);
    for i in 0..2 * spec.n_per_group {
        let group = if i < spec.n_per_group { Group::Control } else { Group::Treatment };
        let entry = rng.gen::<f64>() * spec.accrual;
        let e = -(1.0 - rng.gen::<f64>()).ln();
        let event_time = match group {
            Group::Control => e / spec.control_rate,
            Group::Treatment => curve.inverse_cumulative_hazard(e),
        };
        let dropout = spec.dropout.sample(rng);
        subjects.push(Subject::new(i.to_string(), entry, event_time, dropout, group)?);
    }
    SurvivalDataset::new(subjects)
}

/// Scenario file layout; exactly one of `theta` and `theta_multiple` is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Label used in result tables.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_control_rate")]
    pub control_rate: f64,
    pub rho_star: f64,
    pub gamma_star: f64,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub theta_multiple: Option<f64>,
    pub accrual: f64,
    pub t1: f64,
    pub t2: f64,
    pub n_per_group: usize,
    #[serde(default = "no_dropout")]
    pub dropout: TimeDistribution,
}

fn no_dropout() -> TimeDistribution {
    TimeDistribution::Never
}

impl ScenarioConfig {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!("rho{}_gamma{}", crate::sim::format_g6(self.rho_star), crate::sim::format_g6(self.gamma_star))
        })
    }

    /// Resolve to a scenario; a `theta_multiple` is scaled by the supplied `θ₀`.
    pub fn resolve(&self, theta0: Option<f64>) -> Result<ScenarioSpec> {
        let theta = match (self.theta, self.theta_multiple) {
            (Some(t), None) => t,
            (None, Some(m)) => {
                m * theta0.ok_or_else(|| Error::InvalidInput("theta_multiple requires a calibrated theta0".into()))?
            }
            (None, None) => 0.0,
            (Some(_), Some(_)) => return Err(Error::InvalidInput("give either theta or theta_multiple, not both".into())),
        };
        let spec = ScenarioSpec {
            control_rate: self.control_rate,
            rho_star: self.rho_star,
            gamma_star: self.gamma_star,
            theta,
            accrual: self.accrual,
            t1: self.t1,
            t2: self.t2,
            n_per_group: self.n_per_group,
            dropout: self.dropout,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn control_one_year_survival() {
        let s = ScenarioSpec::standard(0.0, 0.0, 0.0, 10);
        assert!((s.control_curve().survival(1.0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn hazard_ratio_shapes() {
        let th = -0.5;
        let ph = ScenarioSpec::standard(0.0, 0.0, th, 1);
        for s in [0.0, 1.0, 10.0] {
            assert!((ph.hazard_ratio(s) - th.exp()).abs() < 1e-15);
        }
        let late = ScenarioSpec::standard(2.0, 0.0, th, 1);
        assert_eq!(late.hazard_ratio(0.0), 1.0);
        let early = ScenarioSpec::standard(0.0, 2.0, th, 1);
        assert!((early.hazard_ratio(200.0) - 1.0).abs() < 1e-12);
        assert!((early.hazard_ratio(0.0) - th.exp()).abs() < 1e-15);
    }

    #[test]
    fn proportional_hazards_curve_is_exponential() {
        let rate = default_control_rate();
        let c = ScenarioCurve::new(rate, 0.0, 0.0, 0.5f64.ln());
        for s in [0.1, 1.0, 5.0, 30.0, 150.0] {
            let exact = (-0.5 * rate * s).exp();
            assert!((c.survival(s) - exact).abs() < 1e-12 * exact.max(1e-300) + 1e-15, "s={s}");
        }
    }

    #[test]
    fn inverse_cumulative_hazard_round_trip() {
        let c = ScenarioCurve::new(default_control_rate(), 2.0, 0.0, -1.3);
        for e in [1e-6, 0.01, 0.5, 2.0, 10.0, 40.0, 80.0] {
            let s = c.inverse_cumulative_hazard(e);
            assert!((c.cumulative_hazard(s) - e).abs() < 1e-10 * e.max(1.0), "e={e}");
        }
    }

    #[test]
    fn tabulated_cumulative_hazard_matches_direct_quadrature() {
        let rate = default_control_rate();
        let (rho, gamma, theta) = (1.0, 1.0, -2.0);
        let c = ScenarioCurve::new(rate, rho, gamma, theta);
        for s in [0.37, 2.9, 7.77] {
            let direct = crate::quadrature::integrate(
                |u| rate * hazard_ratio(rate, rho, gamma, theta, u),
                0.0,
                s,
                &[],
                crate::quadrature::Tolerance { abs: 1e-15, rel: 1e-13 },
            )
            .unwrap();
            assert!((c.cumulative_hazard(s) - direct).abs() < 1e-11, "{} vs {direct}", c.cumulative_hazard(s));
        }
    }

    #[test]
    fn trial_sampling_is_reproducible() {
        let spec = ScenarioSpec::standard(0.0, 2.0, -1.0, 20);
        let a = sample_trial(&spec, &mut rng::stream(3, 1)).unwrap();
        let b = sample_trial(&spec, &mut rng::stream(3, 1)).unwrap();
        assert_eq!(a.subjects(), b.subjects());
        assert_eq!(a.group_size(Group::Control), 20);
        assert!(sample_trial(&ScenarioSpec { n_per_group: 0, ..spec }, &mut rng::stream(3, 1)).is_err());
    }

    #[test]
    fn config_resolution() {
        let json = r#"{"rho_star":2,"gamma_star":0,"theta_multiple":0.5,"accrual":6,"t1":5,"t2":8,"n_per_group":10}"#;
        let cfg: ScenarioConfig = serde_json::from_str(json).unwrap();
        assert!(cfg.resolve(None).is_err());
        let s = cfg.resolve(Some(-2.0)).unwrap();
        assert_eq!(s.theta, -1.0);
        assert!((s.control_rate - default_control_rate()).abs() < 1e-16);
    }
}
