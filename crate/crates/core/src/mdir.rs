//! One-sided multi-directional combination of weighted log-rank statistics.
//!
//! `W = max_L T_Lᵀ Σ_L⁻ T_L` over nonempty subsets `L` of the weight set, keeping only
//! subsets whose direction `Σ_L⁻ T_L` is componentwise nonnegative. The null distribution
//! is approximated by a wild bootstrap that flips the sign of each subject's event
//! contributions and reuses the covariance estimate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logrank::{check_distinct, EventTable, WeightSpec};
use crate::rng;
use crate::survival::Snapshot;

pub const DEFAULT_PINV_TOL: f64 = 1e-10;
pub const MAX_WEIGHTS: usize = 6;

/// Relative slack for the nonnegativity constraint on `Σ_L⁻ T_L`.
const DIRECTION_SLACK: f64 = 1e-10;

/// Moore-Penrose inverse of a symmetric matrix by eigendecomposition. Eigenvalues at
/// or below `rel_tol · λ_max` are treated as zero.
pub fn pseudo_inverse(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::NotSymmetric);
    }
    let scale = m.amax();
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::NotSymmetric);
            }
        }
    }
    if scale == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let eig = SymmetricEigen::new(m.clone());
    let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let cutoff = rel_tol * lambda_max;
    let inv = eig.eigenvalues.map(|l| if l.abs() <= cutoff { 0.0 } else { 1.0 / l });
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&inv) * v.transpose();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdirResult {
    pub statistic: f64,
    pub p_value: f64,
    pub bootstrap_reps: usize,
    pub achieving_subset: Vec<WeightSpec>,
}

#[derive(Debug, Clone)]
struct SubsetForm {
    indices: Vec<usize>,
    pinv: DMatrix<f64>,
}

/// Prepared mdir test on one snapshot: contributions, covariance and the pseudo-inverse
/// of every principal submatrix are computed once and shared by all bootstrap draws.
#[derive(Debug, Clone)]
pub struct MdirTest {
    specs: Vec<WeightSpec>,
    n_total: usize,
    m: usize,
    event_subjects: Vec<usize>,
    contributions: Vec<f64>,
    covariance: DMatrix<f64>,
    subsets: Vec<SubsetForm>,
    statistic: f64,
    best: Option<usize>,
}

impl MdirTest {
    pub fn new(snap: &Snapshot, specs: &[WeightSpec]) -> Result<Self> {
        Self::with_tolerance(snap, specs, DEFAULT_PINV_TOL)
    }

    pub fn with_tolerance(snap: &Snapshot, specs: &[WeightSpec], rel_tol: f64) -> Result<Self> {
        if specs.is_empty() || specs.len() > MAX_WEIGHTS {
            return Err(Error::InvalidInput(format!(
                "mdir needs between 1 and {MAX_WEIGHTS} weights, got {}",
                specs.len()
            )));
        }
        check_distinct(specs)?;
        if !snap.has_both_groups() {
            return Err(Error::SingleGroup);
        }
        let table = EventTable::new(snap);
        Self::from_table(&table, specs, rel_tol)
    }

    pub(crate) fn from_table(table: &EventTable, specs: &[WeightSpec], rel_tol: f64) -> Result<Self> {
        let m = specs.len();
        let covariance = table.covariance(specs);
        let mut subsets = Vec::with_capacity((1 << m) - 1);
        for mask in 1usize..(1 << m) {
            let indices: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
            let sub = DMatrix::from_fn(indices.len(), indices.len(), |a, b| covariance[(indices[a], indices[b])]);
            subsets.push(SubsetForm { indices, pinv: pseudo_inverse(&sub, rel_tol)? });
        }
        let mut test = Self {
            specs: specs.to_vec(),
            n_total: table.n_total(),
            m,
            event_subjects: table.rows().iter().map(|r| r.subject).collect(),
            contributions: table.contributions(specs),
            covariance,
            subsets,
            statistic: 0.0,
            best: None,
        };
        let t = test.statistics_with(|_| 1.0);
        let (w, best) = test.wald_max(&t);
        test.statistic = w;
        test.best = best;
        Ok(test)
    }

    pub fn specs(&self) -> &[WeightSpec] {
        &self.specs
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Observed non-standardized statistics `T_ℓ`.
    pub fn statistics(&self) -> Vec<f64> {
        self.statistics_with(|_| 1.0)
    }

    pub fn statistic(&self) -> f64 {
        self.statistic
    }

    pub fn achieving_subset(&self) -> Vec<WeightSpec> {
        match self.best {
            Some(k) if self.statistic > 0.0 => self.subsets[k].indices.iter().map(|&j| self.specs[j]).collect(),
            _ => Vec::new(),
        }
    }

    /// Subject indices that carry at least one event contribution, in event order.
    pub fn event_subjects(&self) -> &[usize] {
        &self.event_subjects
    }

    fn statistics_with(&self, sign: impl Fn(usize) -> f64) -> Vec<f64> {
        let m = self.m;
        let mut t = vec![0.0; m];
        for (k, &subject) in self.event_subjects.iter().enumerate() {
            let g = sign(subject);
            let row = &self.contributions[k * m..(k + 1) * m];
            for (acc, c) in t.iter_mut().zip(row) {
                *acc += g * c;
            }
        }
        let scale = 1.0 / (self.n_total as f64).sqrt();
        t.iter_mut().for_each(|x| *x *= scale);
        t
    }

    /// Maximum admissible Wald form for a statistic vector, with the index of the subset
    /// attaining it.
    pub(crate) fn wald_max(&self, t: &[f64]) -> (f64, Option<usize>) {
        let mut best = 0.0;
        let mut arg = None;
        for (k, sub) in self.subsets.iter().enumerate() {
            let tl = DVector::from_iterator(sub.indices.len(), sub.indices.iter().map(|&j| t[j]));
            let dir = &sub.pinv * &tl;
            let slack = DIRECTION_SLACK * dir.amax();
            if dir.iter().any(|&v| v < -slack) {
                continue;
            }
            let w = tl.dot(&dir);
            if w > best {
                best = w;
                arg = Some(k);
            }
        }
        (best, arg)
    }

    /// Bootstrap statistic for a given sign vector indexed by subject.
    pub fn statistic_for_signs(&self, signs: &[f64]) -> f64 {
        let t = self.statistics_with(|i| signs[i]);
        self.wald_max(&t).0
    }

    /// Wild-bootstrap p-value with signs drawn from keyed streams of `seed`.
    pub fn bootstrap_pvalue(&self, reps: usize, seed: u64) -> Result<MdirResult> {
        if reps == 0 {
            return Err(Error::InvalidInput("bootstrap replication count must be at least 1".into()));
        }
        let w = self.statistic;
        let exceed = if w <= 0.0 {
            reps
        } else {
            let words = self.n_total.div_ceil(64);
            (0..reps)
                .into_par_iter()
                .with_min_len(32)
                .filter(|&b| {
                    let mut stream = rng::stream(seed, b as u64);
                    let bits: Vec<u64> = (0..words).map(|_| stream.next_u64()).collect();
                    let t = self.statistics_with(|i| if (bits[i / 64] >> (i % 64)) & 1 == 1 { 1.0 } else { -1.0 });
                    self.wald_max(&t).0 >= w
                })
                .count()
        };
        Ok(MdirResult {
            statistic: w,
            p_value: (1 + exceed) as f64 / (reps + 1) as f64,
            bootstrap_reps: reps,
            achieving_subset: self.achieving_subset(),
        })
    }

    /// p-value over an explicit collection of sign vectors, e.g. all `2ⁿ` of them.
    pub fn pvalue_over_signs<'a>(&self, sign_sets: impl IntoIterator<Item = &'a [f64]>) -> f64 {
        let mut count = 0usize;
        let mut exceed = 0usize;
        for signs in sign_sets {
            count += 1;
            if self.statistic_for_signs(signs) >= self.statistic {
                exceed += 1;
            }
        }
        (1 + exceed) as f64 / (count + 1) as f64
    }
}

/// `(W, achieving subset)` on a snapshot.
pub fn mdir_statistic(snap: &Snapshot, specs: &[WeightSpec]) -> Result<(f64, Vec<WeightSpec>)> {
    let test = MdirTest::new(snap, specs)?;
    Ok((test.statistic(), test.achieving_subset()))
}

/// Wild-bootstrap mdir p-value. The generator supplies a single seed; the draws
/// themselves come from keyed streams so parallel execution matches serial.
pub fn wild_bootstrap_pvalue<R: Rng + ?Sized>(
    snap: &Snapshot,
    specs: &[WeightSpec],
    reps: usize,
    rng: &mut R,
) -> Result<MdirResult> {
    if reps == 0 {
        return Err(Error::InvalidInput("bootstrap replication count must be at least 1".into()));
    }
    let seed = rng.gen();
    MdirTest::new(snap, specs)?.bootstrap_pvalue(reps, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logrank::wlr_statistic;
    use crate::survival::{Group, Record};

    fn snap(obs: &[(f64, bool, Group)]) -> Snapshot {
        let recs = obs
            .iter()
            .enumerate()
            .map(|(i, &(time, event, group))| Record { subject: i, time, event, group })
            .collect();
        Snapshot::from_records(10.0, obs.len(), recs).unwrap()
    }

    #[test]
    fn pinv_trivial_cases() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((pseudo_inverse(&id, 1e-10).unwrap() - &id).amax() < 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        let p = pseudo_inverse(&d, 1e-10).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15 && p[(1, 1)].abs() < 1e-15 && p[(0, 1)] == 0.0);
        let ns = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(matches!(pseudo_inverse(&ns, 1e-10), Err(Error::NotSymmetric)));
    }

    #[test]
    fn singleton_reduces_to_squared_z() {
        let late_treat = snap(&[
            (1.0, true, Group::Control),
            (2.0, true, Group::Control),
            (3.0, true, Group::Treatment),
            (4.0, false, Group::Treatment),
            (5.0, true, Group::Control),
        ]);
        let z = wlr_statistic(&late_treat, &WeightSpec::LOG_RANK).unwrap().standardized;
        assert!(z > 0.0);
        let (w, subset) = mdir_statistic(&late_treat, &[WeightSpec::LOG_RANK]).unwrap();
        assert!((w - z * z).abs() < 1e-12);
        assert_eq!(subset, vec![WeightSpec::LOG_RANK]);

        let early_treat = snap(&[
            (1.0, true, Group::Treatment),
            (2.0, true, Group::Treatment),
            (3.0, true, Group::Control),
            (4.0, false, Group::Control),
        ]);
        let (w, subset) = mdir_statistic(&early_treat, &[WeightSpec::LOG_RANK]).unwrap();
        assert_eq!(w, 0.0);
        assert!(subset.is_empty());
        let mut rng = rng::stream(1, 0);
        let res = wild_bootstrap_pvalue(&early_treat, &[WeightSpec::LOG_RANK], 50, &mut rng).unwrap();
        assert_eq!(res.p_value, 1.0);
    }

    #[test]
    fn rejects_bad_weight_sets() {
        let s = snap(&[(1.0, true, Group::Control), (2.0, true, Group::Treatment)]);
        assert!(MdirTest::new(&s, &[]).is_err());
        assert!(MdirTest::new(&s, &[WeightSpec::LOG_RANK, WeightSpec::LOG_RANK]).is_err());
        let seven: Vec<_> = (0..7).map(|k| WeightSpec::fh(k as f64, 0.0)).collect();
        assert!(MdirTest::new(&s, &seven).is_err());
        let mut rng = rng::stream(1, 0);
        assert!(wild_bootstrap_pvalue(&s, &[WeightSpec::LOG_RANK], 0, &mut rng).is_err());
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let s = snap(&[
            (0.5, true, Group::Control),
            (1.0, true, Group::Control),
            (1.5, true, Group::Treatment),
            (2.0, false, Group::Treatment),
            (2.5, true, Group::Control),
            (3.0, true, Group::Treatment),
            (3.5, false, Group::Control),
        ]);
        let specs = [WeightSpec::fh(0.0, 0.0), WeightSpec::fh(1.0, 0.0), WeightSpec::fh(0.0, 1.0)];
        let test = MdirTest::new(&s, &specs).unwrap();
        let a = test.bootstrap_pvalue(200, 99).unwrap();
        let b = test.bootstrap_pvalue(200, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.p_value > 0.0 && a.p_value <= 1.0);
    }
}
