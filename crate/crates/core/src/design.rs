//! Two-stage adaptive designs: combination functions, sequential bounds, the level
//! equation, conditional error and the stage-wise decision rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::optim::bisect;
use crate::quadrature::{integrate, Tolerance};

const P_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Combination {
    InverseNormal { w1: f64, w2: f64 },
    FisherProduct,
}

impl Combination {
    pub fn equal_weights() -> Self {
        let w = std::f64::consts::FRAC_1_SQRT_2;
        Combination::InverseNormal { w1: w, w2: w }
    }

    pub fn validate(&self) -> Result<()> {
        if let Combination::InverseNormal { w1, w2 } = *self {
            if !(w1 >= 0.0 && w2 >= 0.0) || ((w1 * w1 + w2 * w2) - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "inverse-normal weights must be nonnegative with w1² + w2² = 1, got ({w1}, {w2})"
                )));
            }
        }
        Ok(())
    }

    /// `C(p1, p2)`, with p-values clamped to `[1e-15, 1 - 1e-15]`.
    pub fn combine(&self, p1: f64, p2: f64) -> f64 {
        let p1 = p1.clamp(P_FLOOR, 1.0 - P_FLOOR);
        let p2 = p2.clamp(P_FLOOR, 1.0 - P_FLOOR);
        match *self {
            Combination::InverseNormal { w1, w2 } => {
                normal::sf(w1 * normal::quantile(1.0 - p1) + w2 * normal::quantile(1.0 - p2))
            }
            Combination::FisherProduct => p1 * p2,
        }
    }

    /// `sup{u ∈ [0,1] : C(p1, u) ≤ c}`.
    pub fn conditional_error(&self, p1: f64, c: f64) -> f64 {
        match *self {
            Combination::InverseNormal { w1, w2 } => {
                let p1 = p1.clamp(P_FLOOR, 1.0 - P_FLOOR);
                let lhs = normal::quantile(1.0 - c) - w1 * normal::quantile(1.0 - p1);
                if w2 == 0.0 {
                    return if lhs <= 0.0 { 1.0 } else { 0.0 };
                }
                normal::sf(lhs / w2)
            }
            Combination::FisherProduct => {
                if p1 <= 0.0 {
                    1.0
                } else {
                    (c / p1).min(1.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageDecision {
    RejectAtInterim,
    FutilityStop,
    Continue,
    RejectAtFinal,
    AcceptAtFinal,
}

impl StageDecision {
    pub fn is_rejection(self) -> bool {
        matches!(self, StageDecision::RejectAtInterim | StageDecision::RejectAtFinal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStageDesign {
    pub alpha: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub c: f64,
    pub combination: Combination,
    pub t1: f64,
    pub t2: f64,
}

impl TwoStageDesign {
    pub fn new(alpha: f64, alpha0: f64, alpha1: f64, c: f64, combination: Combination, t1: f64, t2: f64) -> Result<Self> {
        let d = Self { alpha, alpha0, alpha1, c, combination, t1, t2 };
        d.validate()?;
        Ok(d)
    }

    /// Inverse-normal design with O'Brien-Fleming bounds and no futility stop.
    pub fn obf(alpha: f64, combination: Combination, t1: f64, t2: f64) -> Result<Self> {
        let (alpha1, c) = bounds(BoundShape::OBrienFleming, alpha, combination)?;
        Self::new(alpha, 1.0, alpha1, c, combination, t1, t2)
    }

    pub fn validate(&self) -> Result<()> {
        self.combination.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(0.0 <= self.alpha1 && self.alpha1 <= self.alpha0 && self.alpha0 <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "need 0 <= alpha1 <= alpha0 <= 1, got alpha1={} alpha0={}",
                self.alpha1, self.alpha0
            )));
        }
        if !(0.0..=1.0).contains(&self.c) {
            return Err(Error::InvalidInput(format!("c must lie in [0, 1], got {}", self.c)));
        }
        // Either bound above alpha already exceeds the level on its own.
        if self.alpha1 > self.alpha || self.c > self.alpha {
            return Err(Error::InvalidInput(format!(
                "alpha1 and c may not exceed alpha={}, got alpha1={} c={}",
                self.alpha, self.alpha1, self.c
            )));
        }
        if !(self.t1 > 0.0 && self.t1 < self.t2 && self.t2.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "analysis times must satisfy 0 < t1 < t2, got t1={} t2={}",
                self.t1, self.t2
            )));
        }
        Ok(())
    }

    pub fn combine(&self, p1: f64, p2: f64) -> f64 {
        self.combination.combine(p1, p2)
    }

    pub fn has_futility_bound(&self) -> bool {
        self.alpha0 < 1.0
    }

    pub fn in_continuation(&self, p1: f64) -> bool {
        p1 > self.alpha1 && (!self.has_futility_bound() || p1 < self.alpha0)
    }

    /// Conditional error `α̃₂` for a first-stage p-value in the continuation region.
    pub fn conditional_error(&self, p1: f64) -> Result<f64> {
        if !self.in_continuation(p1) {
            return Err(Error::NotInContinuation { p1, alpha1: self.alpha1, alpha0: self.alpha0 });
        }
        Ok(self.combination.conditional_error(p1, self.c))
    }

    pub fn decide(&self, p1: f64, p2: Option<f64>) -> StageDecision {
        if p1 <= self.alpha1 {
            return StageDecision::RejectAtInterim;
        }
        if self.has_futility_bound() && p1 >= self.alpha0 {
            return StageDecision::FutilityStop;
        }
        match p2 {
            None => StageDecision::Continue,
            Some(p2) if self.combine(p1, p2) <= self.c => StageDecision::RejectAtFinal,
            Some(_) => StageDecision::AcceptAtFinal,
        }
    }

    /// `α₁ + ∫_{α₁}^{α₀} α̃₂(p₁) dp₁`.
    pub fn level_check(&self) -> Result<f64> {
        let upper = self.alpha0;
        if upper <= self.alpha1 {
            return Ok(self.alpha1);
        }
        let mut breaks = Vec::new();
        if let Combination::FisherProduct = self.combination {
            if self.c > self.alpha1 && self.c < upper {
                breaks.push(self.c);
            }
        }
        let tol = Tolerance { abs: 1e-13, rel: 1e-11 };
        let area = integrate(|p1| self.combination.conditional_error(p1, self.c), self.alpha1, upper, &breaks, tol)?;
        Ok(self.alpha1 + area)
    }

    /// Stage-wise z-scale boundaries `(b1, b2)` of an inverse-normal design.
    pub fn z_bounds(&self) -> (f64, f64) {
        (normal::quantile(1.0 - self.alpha1), normal::quantile(1.0 - self.c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundShape {
    #[serde(rename = "obf")]
    OBrienFleming,
    Pocock,
}

/// Probability that the two-stage inverse-normal test with z-boundaries `(b1, b2)`
/// rejects when the stage-wise statistics are independent `N(μ₁, 1)` and `N(μ₂, 1)`.
/// `z_futility` is the z-value below which the trial stops for futility.
pub fn rejection_probability(b1: f64, b2: f64, w1: f64, w2: f64, mu1: f64, mu2: f64, z_futility: f64) -> Result<f64> {
    let early = normal::sf(b1 - mu1);
    if z_futility >= b1 {
        return Ok(early);
    }
    let cont = if w2 == 0.0 {
        // Degenerate second stage: combined statistic equals the first-stage one.
        let lo = z_futility.max(b2 / w1.max(f64::MIN_POSITIVE));
        if lo >= b1 {
            0.0
        } else {
            normal::cdf(b1 - mu1) - normal::cdf(lo - mu1)
        }
    } else {
        let lower = z_futility.max(mu1 - 40.0);
        let upper = b1.min(mu1 + 40.0);
        let tol = Tolerance { abs: 1e-14, rel: 1e-12 };
        integrate(|z| normal::pdf(z - mu1) * normal::sf((b2 - w1 * z) / w2 - mu2), lower, upper, &[], tol)?
    };
    Ok(early + cont)
}

/// `(α₁, c)` for an inverse-normal design without futility stop. O'Brien-Fleming uses
/// `b1 = b / w1`, `b2 = b`; Pocock uses `b1 = b2 = b`.
pub fn bounds(shape: BoundShape, alpha: f64, combination: Combination) -> Result<(f64, f64)> {
    combination.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (w1, w2) = match combination {
        Combination::InverseNormal { w1, w2 } => (w1, w2),
        Combination::FisherProduct => {
            return Err(Error::InvalidInput("sequential bounds are defined for the inverse-normal combination".into()))
        }
    };
    if w2 == 0.0 {
        return Ok((alpha, alpha));
    }
    let shape_b1 = |b: f64| match shape {
        BoundShape::OBrienFleming if w1 == 0.0 => f64::INFINITY,
        BoundShape::OBrienFleming => b / w1,
        BoundShape::Pocock => b,
    };
    let level = |b: f64| rejection_probability(shape_b1(b), b, w1, w2, 0.0, 0.0, f64::NEG_INFINITY).unwrap_or(f64::NAN);
    let mut hi = 1.0;
    while level(hi) > alpha {
        hi *= 2.0;
        if hi > 64.0 {
            return Err(Error::Bracketing("no upper bracket for the sequential boundary".into()));
        }
    }
    let b = bisect(|b| level(b) - alpha, -40.0, hi, 1e-14)?;
    Ok((normal::sf(shape_b1(b)), normal::sf(b)))
}

pub fn obf_bounds(alpha: f64, w1: f64, w2: f64) -> Result<(f64, f64)> {
    bounds(BoundShape::OBrienFleming, alpha, Combination::InverseNormal { w1, w2 })
}

pub fn pocock_bounds(alpha: f64, w1: f64, w2: f64) -> Result<(f64, f64)> {
    bounds(BoundShape::Pocock, alpha, Combination::InverseNormal { w1, w2 })
}

/// Design file layout: bounds are either explicit or derived from a shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub alpha: f64,
    #[serde(default = "one")]
    pub alpha0: f64,
    pub combination: Combination,
    pub bounds: BoundsConfig,
    pub t1: f64,
    pub t2: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundsConfig {
    Obf,
    Pocock,
    Explicit { alpha1: f64, c: f64 },
}

impl DesignConfig {
    pub fn build(&self) -> Result<TwoStageDesign> {
        let (alpha1, c) = match self.bounds {
            BoundsConfig::Obf | BoundsConfig::Pocock if self.alpha0 < 1.0 => {
                return Err(Error::InvalidInput(
                    "obf/pocock bounds are derived without a futility stop; give explicit bounds with alpha0 < 1".into(),
                ))
            }
            BoundsConfig::Obf => bounds(BoundShape::OBrienFleming, self.alpha, self.combination)?,
            BoundsConfig::Pocock => bounds(BoundShape::Pocock, self.alpha, self.combination)?,
            BoundsConfig::Explicit { alpha1, c } => (alpha1, c),
        };
        TwoStageDesign::new(self.alpha, self.alpha0, alpha1, c, self.combination, self.t1, self.t2)
    }
}

impl From<&TwoStageDesign> for DesignConfig {
    fn from(d: &TwoStageDesign) -> Self {
        DesignConfig {
            alpha: d.alpha,
            alpha0: d.alpha0,
            combination: d.combination,
            bounds: BoundsConfig::Explicit { alpha1: d.alpha1, c: d.c },
            t1: d.t1,
            t2: d.t2,
        }
    }
}
