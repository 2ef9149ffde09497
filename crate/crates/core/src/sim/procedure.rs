use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logrank::WeightSpec;

/// First-stage test of a two-stage procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstStage {
    /// Wild-bootstrap mdir test over a weight set.
    Mdir(Vec<WeightSpec>),
    /// Single weighted log-rank test with a normal p-value.
    Single(WeightSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondStage {
    Fixed(WeightSpec),
    /// Weight chosen at the interim by conditional power.
    Adaptive(Vec<WeightSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stages {
    /// mdir test at the final analysis only, at the full level.
    OneStage(Vec<WeightSpec>),
    TwoStage { first: FirstStage, second: SecondStage },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Procedure {
    pub name: String,
    pub stages: Stages,
}

impl Procedure {
    pub fn one_stage(name: impl Into<String>, weights: Vec<WeightSpec>) -> Self {
        Self { name: name.into(), stages: Stages::OneStage(weights) }
    }

    pub fn adaptive(name: impl Into<String>, mdir: Vec<WeightSpec>, candidates: Vec<WeightSpec>) -> Self {
        Self {
            name: name.into(),
            stages: Stages::TwoStage { first: FirstStage::Mdir(mdir), second: SecondStage::Adaptive(candidates) },
        }
    }

    /// mdir at the interim, a pre-fixed weight at the final analysis.
    pub fn fixed(name: impl Into<String>, mdir: Vec<WeightSpec>, second: WeightSpec) -> Self {
        Self {
            name: name.into(),
            stages: Stages::TwoStage { first: FirstStage::Mdir(mdir), second: SecondStage::Fixed(second) },
        }
    }

    /// The same weighted log-rank test at both analyses.
    pub fn single_weight(name: impl Into<String>, weight: WeightSpec) -> Self {
        Self {
            name: name.into(),
            stages: Stages::TwoStage { first: FirstStage::Single(weight), second: SecondStage::Fixed(weight) },
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self.stages, Stages::TwoStage { second: SecondStage::Adaptive(_), .. })
    }

    pub fn candidates(&self) -> &[WeightSpec] {
        match &self.stages {
            Stages::TwoStage { second: SecondStage::Adaptive(c), .. } => c,
            _ => &[],
        }
    }
}

/// The six named procedures of the power study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcedureKind {
    #[serde(rename = "OS-MDIR")]
    OsMdir,
    #[serde(rename = "OS-restrMDIR")]
    OsRestrMdir,
    #[serde(rename = "TS-AD")]
    TsAd,
    #[serde(rename = "TS-LR")]
    TsLr,
    #[serde(rename = "TS-optFH")]
    TsOptFh,
    #[serde(rename = "TS-restrAD")]
    TsRestrAd,
}

fn fh(rho: f64, gamma: f64) -> WeightSpec {
    WeightSpec::fh(rho, gamma)
}

impl ProcedureKind {
    pub const ALL: [ProcedureKind; 6] = [
        ProcedureKind::OsMdir,
        ProcedureKind::OsRestrMdir,
        ProcedureKind::TsAd,
        ProcedureKind::TsLr,
        ProcedureKind::TsOptFh,
        ProcedureKind::TsRestrAd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProcedureKind::OsMdir => "OS-MDIR",
            ProcedureKind::OsRestrMdir => "OS-restrMDIR",
            ProcedureKind::TsAd => "TS-AD",
            ProcedureKind::TsLr => "TS-LR",
            ProcedureKind::TsOptFh => "TS-optFH",
            ProcedureKind::TsRestrAd => "TS-restrAD",
        }
    }

    /// `{(0,0), (1,0), (0,1)}`.
    pub fn mdir_weights() -> Vec<WeightSpec> {
        vec![fh(0.0, 0.0), fh(1.0, 0.0), fh(0.0, 1.0)]
    }

    /// The eight Fleming-Harrington candidates for the second stage.
    pub fn candidate_weights() -> Vec<WeightSpec> {
        [(0., 0.), (1., 0.), (2., 0.), (3., 0.), (1., 1.), (0., 1.), (0., 2.), (0., 3.)]
            .iter()
            .map(|&(r, g)| fh(r, g))
            .collect()
    }

    pub fn restricted_mdir_weights(rho_star: f64, gamma_star: f64) -> Vec<WeightSpec> {
        if rho_star > gamma_star && gamma_star == 0.0 {
            vec![fh(0.0, 0.0), fh(1.0, 0.0)]
        } else if gamma_star > rho_star && rho_star == 0.0 {
            vec![fh(0.0, 0.0), fh(0.0, 1.0)]
        } else {
            Self::mdir_weights()
        }
    }

    /// Candidates with `ρ > γ` plus the standard weight when `ρ* > γ*`, mirrored when
    /// `γ* > ρ*`, and those with `|ρ - γ| ≤ 1` otherwise.
    pub fn restricted_candidates(rho_star: f64, gamma_star: f64) -> Vec<WeightSpec> {
        let keep = |w: &WeightSpec| {
            let WeightSpec::FlemingHarrington { rho, gamma } = *w else { return false };
            let standard = rho == 0.0 && gamma == 0.0;
            if rho_star > gamma_star {
                standard || rho > gamma
            } else if gamma_star > rho_star {
                standard || gamma > rho
            } else {
                (rho - gamma).abs() <= 1.0
            }
        };
        Self::candidate_weights().into_iter().filter(keep).collect()
    }

    /// Concrete procedure for a scenario with target indices `(ρ*, γ*)`.
    pub fn procedure(self, rho_star: f64, gamma_star: f64) -> Procedure {
        let name = self.name();
        match self {
            ProcedureKind::OsMdir => Procedure::one_stage(name, Self::mdir_weights()),
            ProcedureKind::OsRestrMdir => Procedure::one_stage(name, Self::restricted_mdir_weights(rho_star, gamma_star)),
            ProcedureKind::TsAd => Procedure::adaptive(name, Self::mdir_weights(), Self::candidate_weights()),
            ProcedureKind::TsLr => Procedure::single_weight(name, WeightSpec::LOG_RANK),
            ProcedureKind::TsOptFh => Procedure::single_weight(name, fh(rho_star, gamma_star)),
            ProcedureKind::TsRestrAd => Procedure::adaptive(
                name,
                Self::restricted_mdir_weights(rho_star, gamma_star),
                Self::restricted_candidates(rho_star, gamma_star),
            ),
        }
    }
}

impl fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProcedureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProcedureKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidInput(format!("unknown procedure '{s}'")))
    }
}
