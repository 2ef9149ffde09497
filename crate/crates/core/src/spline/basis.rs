use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knot locations on the log-time scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnotVector {
    pub k_min: f64,
    pub k_max: f64,
    pub internal: Vec<f64>,
}

impl KnotVector {
    pub fn new(k_min: f64, k_max: f64, internal: Vec<f64>) -> Result<Self> {
        let kv = Self { k_min, k_max, internal };
        kv.validate()?;
        Ok(kv)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_min < self.k_max) || !self.k_min.is_finite() || !self.k_max.is_finite() {
            return Err(Error::InvalidInput(format!(
                "boundary knots must satisfy k_min < k_max, got ({}, {})",
                self.k_min, self.k_max
            )));
        }
        if self.internal.iter().any(|&k| !(k > self.k_min && k < self.k_max))
            || self.internal.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::InvalidInput("internal knots must be nondecreasing and strictly inside the boundary".into()));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.internal.len()
    }

    /// All knots in increasing order, boundaries included.
    pub fn all(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.internal.len() + 2);
        v.push(self.k_min);
        v.extend_from_slice(&self.internal);
        v.push(self.k_max);
        v
    }

    fn lambda(&self, k: f64) -> f64 {
        (self.k_max - k) / (self.k_max - self.k_min)
    }
}

/// Boundary knots at the extreme log event times and `p` internal knots at evenly
/// spaced centiles (linear-interpolation quantiles).
pub fn place_knots(uncensored_times: &[f64], p: usize) -> Result<KnotVector> {
    let mut logs: Vec<f64> = uncensored_times.iter().map(|t| t.ln()).collect();
    if logs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("event times must be positive and finite".into()));
    }
    logs.sort_by(f64::total_cmp);
    let distinct = logs.windows(2).filter(|w| w[1] > w[0]).count() + usize::from(!logs.is_empty());
    if distinct < 2 {
        return Err(Error::NotEstimable(format!("a spline needs at least 2 distinct event times, found {distinct}")));
    }
    let n = logs.len();
    let quantile = |q: f64| {
        let h = (n - 1) as f64 * q;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        logs[lo] + (h - lo as f64) * (logs[hi] - logs[lo])
    };
    let k_min = logs[0];
    let k_max = logs[n - 1];
    let internal: Vec<f64> = (1..=p).map(|j| quantile(j as f64 / (p + 1) as f64)).collect();
    if internal.iter().any(|&k| !(k > k_min && k < k_max)) {
        return Err(Error::NotEstimable(format!(
            "centile knots coincide with a boundary knot; too few distinct event times for {p} internal knots"
        )));
    }
    KnotVector::new(k_min, k_max, internal)
}

fn cube_plus(u: f64) -> f64 {
    if u > 0.0 {
        u * u * u
    } else {
        0.0
    }
}

fn square_plus(u: f64) -> f64 {
    if u > 0.0 {
        u * u
    } else {
        0.0
    }
}

/// Basis `(1, x, v_1(x), …, v_p(x))`.
pub fn basis(x: f64, knots: &KnotVector) -> Vec<f64> {
    let mut out = Vec::with_capacity(knots.p() + 2);
    out.push(1.0);
    out.push(x);
    for &k in &knots.internal {
        let l = knots.lambda(k);
        out.push(cube_plus(x - k) - l * cube_plus(x - knots.k_min) - (1.0 - l) * cube_plus(x - knots.k_max));
    }
    out
}

/// Derivative of the basis with respect to `x`.
pub fn basis_derivative(x: f64, knots: &KnotVector) -> Vec<f64> {
    let mut out = Vec::with_capacity(knots.p() + 2);
    out.push(0.0);
    out.push(1.0);
    for &k in &knots.internal {
        let l = knots.lambda(k);
        out.push(3.0 * (square_plus(x - k) - l * square_plus(x - knots.k_min) - (1.0 - l) * square_plus(x - knots.k_max)));
    }
    out
}
