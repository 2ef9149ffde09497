//! Smooth survival laws used for planning, extrapolation and simulation.

/// A continuous survival distribution on `(0, ∞)`.
pub trait SurvivalCurve: Send + Sync {
    fn survival(&self, s: f64) -> f64;

    fn density(&self, s: f64) -> f64;

    fn hazard(&self, s: f64) -> f64 {
        let surv = self.survival(s);
        if surv > 0.0 {
            self.density(s) / surv
        } else {
            0.0
        }
    }

    fn cdf(&self, s: f64) -> f64 {
        1.0 - self.survival(s)
    }

    /// Points where the curve or its derivatives are not smooth.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<C: SurvivalCurve + ?Sized> SurvivalCurve for &C {
    fn survival(&self, s: f64) -> f64 {
        (**self).survival(s)
    }
    fn density(&self, s: f64) -> f64 {
        (**self).density(s)
    }
    fn hazard(&self, s: f64) -> f64 {
        (**self).hazard(s)
    }
    fn kinks(&self) -> Vec<f64> {
        (**self).kinks()
    }
}

impl<C: SurvivalCurve + ?Sized> SurvivalCurve for Box<C> {
    fn survival(&self, s: f64) -> f64 {
        (**self).survival(s)
    }
    fn density(&self, s: f64) -> f64 {
        (**self).density(s)
    }
    fn hazard(&self, s: f64) -> f64 {
        (**self).hazard(s)
    }
    fn kinks(&self) -> Vec<f64> {
        (**self).kinks()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponential {
    pub rate: f64,
}

impl Exponential {
    pub fn new(rate: f64) -> Self {
        Self { rate }
    }
}

impl SurvivalCurve for Exponential {
    fn survival(&self, s: f64) -> f64 {
        if s <= 0.0 {
            1.0
        } else {
            (-self.rate * s).exp()
        }
    }

    fn density(&self, s: f64) -> f64 {
        if s < 0.0 {
            0.0
        } else {
            self.rate * (-self.rate * s).exp()
        }
    }

    fn hazard(&self, _s: f64) -> f64 {
        self.rate
    }
}

/// Distribution function on calendar or trial time, used for recruitment and dropout.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeDistribution {
    /// Uniform on `[0, upper]`.
    Uniform { upper: f64 },
    Exponential { rate: f64 },
    /// Point mass at infinity: the event never happens.
    Never,
}

impl TimeDistribution {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            TimeDistribution::Uniform { upper } => {
                if x <= 0.0 {
                    0.0
                } else if x >= upper {
                    1.0
                } else {
                    x / upper
                }
            }
            TimeDistribution::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            TimeDistribution::Never => 0.0,
        }
    }

    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            TimeDistribution::Uniform { upper } => vec![0.0, upper],
            _ => vec![0.0],
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let ok = match *self {
            TimeDistribution::Uniform { upper } => upper > 0.0 && upper.is_finite(),
            TimeDistribution::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            TimeDistribution::Never => true,
        };
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidInput(format!("invalid distribution {self:?}")))
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            TimeDistribution::Uniform { upper } => rng.gen::<f64>() * upper,
            TimeDistribution::Exponential { rate } => -(1.0 - rng.gen::<f64>()).ln() / rate,
            TimeDistribution::Never => f64::INFINITY,
        }
    }
}
