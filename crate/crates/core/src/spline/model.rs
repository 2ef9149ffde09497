use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::basis::{basis, basis_derivative, KnotVector};
use crate::curve::SurvivalCurve;
use crate::error::{Error, Result};
use crate::normal;

/// Link scale. The declaration order is the tie-break order in model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplineScale {
    Hazard,
    Odds,
    Normal,
}

impl SplineScale {
    pub const ALL: [SplineScale; 3] = [SplineScale::Hazard, SplineScale::Odds, SplineScale::Normal];

    pub fn name(self) -> &'static str {
        match self {
            SplineScale::Hazard => "hazard",
            SplineScale::Odds => "odds",
            SplineScale::Normal => "normal",
        }
    }

    /// `g(S)`.
    pub fn link(self, surv: f64) -> f64 {
        match self {
            SplineScale::Hazard => (-surv.ln()).ln(),
            SplineScale::Odds => ((1.0 - surv) / surv).ln(),
            SplineScale::Normal => -normal::quantile(surv),
        }
    }

    pub(crate) fn ln_survival(self, eta: f64) -> f64 {
        match self {
            SplineScale::Hazard => -eta.exp(),
            SplineScale::Odds => -softplus(eta),
            SplineScale::Normal => normal::ln_cdf(-eta),
        }
    }

    /// `ln f(t) + ln t - ln η'`, i.e. the log density without the chain-rule factor.
    pub(crate) fn ln_density_core(self, eta: f64) -> f64 {
        match self {
            SplineScale::Hazard => eta - eta.exp(),
            SplineScale::Odds => eta - 2.0 * softplus(eta),
            SplineScale::Normal => normal::ln_pdf(eta),
        }
    }
}

impl fmt::Display for SplineScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplineScale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hazard" => Ok(SplineScale::Hazard),
            "odds" => Ok(SplineScale::Odds),
            "normal" => Ok(SplineScale::Normal),
            other => Err(Error::InvalidInput(format!("unknown spline scale '{other}'"))),
        }
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineModel {
    pub scale: SplineScale,
    pub knots: KnotVector,
    pub phi: Vec<f64>,
    pub loglik: f64,
}

impl SplineModel {
    pub fn new(scale: SplineScale, knots: KnotVector, phi: Vec<f64>, loglik: f64) -> Result<Self> {
        knots.validate()?;
        if phi.len() != knots.p() + 2 {
            return Err(Error::InvalidInput(format!(
                "expected {} spline coefficients, got {}",
                knots.p() + 2,
                phi.len()
            )));
        }
        Ok(Self { scale, knots, phi, loglik })
    }

    pub fn p(&self) -> usize {
        self.knots.p()
    }

    pub fn n_params(&self) -> usize {
        self.knots.p() + 2
    }

    pub fn aic(&self) -> f64 {
        2.0 * self.n_params() as f64 - 2.0 * self.loglik
    }

    /// `s(x; φ)` at log time `x`.
    pub fn eta(&self, x: f64) -> f64 {
        dot(&basis(x, &self.knots), &self.phi)
    }

    /// `ds/dx` at log time `x`.
    pub fn eta_prime(&self, x: f64) -> f64 {
        dot(&basis_derivative(x, &self.knots), &self.phi)
    }

    /// Whether the spline is nondecreasing on the whole real line with a positive
    /// slope to the left of the first knot (so that `S(0+) = 1`).
    pub fn is_monotone(&self) -> bool {
        monotone_on_line(&self.knots, &self.phi)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `η'` is constant left of `k_min` and right of `k_max` and quadratic between
/// consecutive knots, so checking knots and interior vertices is exact.
pub(crate) fn monotone_on_line(knots: &KnotVector, phi: &[f64]) -> bool {
    if !(phi[1] > 0.0) {
        return false;
    }
    let d = |x: f64| dot(&basis_derivative(x, knots), phi);
    let all = knots.all();
    for w in all.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fm, fb) = (d(a), d(0.5 * (a + b)), d(b));
        if fa < 0.0 || fb < 0.0 || fm < 0.0 {
            return false;
        }
        // Parabola through the three points; its vertex may dip below zero.
        let h = 0.5 * (b - a);
        let curv = (fa - 2.0 * fm + fb) / (h * h);
        if curv > 0.0 {
            let slope_mid = (fb - fa) / (2.0 * h);
            let u = -slope_mid / curv;
            if u.abs() < h {
                let vertex = fm + slope_mid * u + 0.5 * curv * u * u;
                if vertex < 0.0 {
                    return false;
                }
            }
        }
    }
    true
}

impl SurvivalCurve for SplineModel {
    fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        self.scale.ln_survival(self.eta(t.ln())).exp()
    }

    fn density(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let x = t.ln();
        let dp = self.eta_prime(x);
        if dp <= 0.0 {
            return 0.0;
        }
        (self.scale.ln_density_core(self.eta(x)) + dp.ln() - x).exp()
    }

    fn hazard(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let x = t.ln();
        let dp = self.eta_prime(x).max(0.0);
        let eta = self.eta(x);
        let core = match self.scale {
            SplineScale::Hazard => eta.exp(),
            SplineScale::Odds => 1.0 / (1.0 + (-eta).exp()),
            SplineScale::Normal => (normal::ln_pdf(eta) - normal::ln_cdf(-eta)).exp(),
        };
        core * dp / t
    }

    fn kinks(&self) -> Vec<f64> {
        self.knots.all().into_iter().map(f64::exp).collect()
    }
}

/// Fitted models for the two treatment groups, sharing `(p, scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupExtrapolation {
    pub model0: SplineModel,
    pub model1: SplineModel,
}

impl GroupExtrapolation {
    pub fn combined_aic(&self) -> f64 {
        self.model0.aic() + self.model1.aic()
    }

    pub fn p(&self) -> usize {
        self.model0.p()
    }

    pub fn scale(&self) -> SplineScale {
        self.model0.scale
    }
}

/// Serialized form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineDump {
    pub scale: SplineScale,
    pub knots: KnotVector,
    pub phi: Vec<f64>,
    pub loglik: f64,
    pub aic: f64,
}

impl From<&SplineModel> for SplineDump {
    fn from(m: &SplineModel) -> Self {
        Self { scale: m.scale, knots: m.knots.clone(), phi: m.phi.clone(), loglik: m.loglik, aic: m.aic() }
    }
}

impl TryFrom<SplineDump> for SplineModel {
    type Error = Error;
    fn try_from(d: SplineDump) -> Result<Self> {
        SplineModel::new(d.scale, d.knots, d.phi, d.loglik)
    }
}
