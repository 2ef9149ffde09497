//! Independent reference computations shared by the integration tests. Nothing here
//! calls into the library's statistics; only its data types are used to build inputs.

#![allow(dead_code)]

pub mod parametric;

use nalgebra::{DMatrix, DVector};
use npsurv_core::survival::{Group, Record, Snapshot};
use rand::Rng;

/// `(time, event, treated)`.
pub type Obs = (f64, bool, bool);

pub fn snapshot(obs: &[Obs]) -> Snapshot {
    let recs = obs
        .iter()
        .enumerate()
        .map(|(i, &(time, event, treated))| Record {
            subject: i,
            time,
            event,
            group: if treated { Group::Treatment } else { Group::Control },
        })
        .collect();
    Snapshot::from_records(1e6, obs.len(), recs).unwrap()
}

/// Random right-censored sample on a coarse grid so that ties occur, with both
/// groups present.
pub fn random_obs<R: Rng>(rng: &mut R, n: usize, grid: f64) -> Vec<Obs> {
    loop {
        let obs: Vec<Obs> = (0..n)
            .map(|_| {
                let treated = rng.gen_bool(0.5);
                let rate = if treated { 0.7 } else { 1.0 };
                let t = -rng.gen::<f64>().ln() / rate;
                let c = rng.gen::<f64>() * 3.0;
                let (time, event) = if t <= c { (t, true) } else { (c, false) };
                let time = if grid > 0.0 { (time / grid).ceil() * grid } else { time };
                (time, event, treated)
            })
            .collect();
        let treated = obs.iter().filter(|o| o.2).count();
        let events = obs.iter().filter(|o| o.1).count();
        if treated > 0 && treated < n && events > 0 {
            return obs;
        }
    }
}

/// Distinct event times in increasing order.
pub fn event_times(obs: &[Obs]) -> Vec<f64> {
    let mut t: Vec<f64> = obs.iter().filter(|o| o.1).map(|o| o.0).collect();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t.dedup();
    t
}

/// Product-limit estimate `S(s)` by direct counting.
pub fn km_at(obs: &[Obs], s: f64, filter: impl Fn(&Obs) -> bool) -> f64 {
    let sub: Vec<Obs> = obs.iter().copied().filter(|o| filter(o)).collect();
    let mut surv = 1.0;
    for u in event_times(&sub) {
        if u > s {
            break;
        }
        let at_risk = sub.iter().filter(|o| o.0 >= u).count() as f64;
        let deaths = sub.iter().filter(|o| o.0 == u && o.1).count() as f64;
        surv *= 1.0 - deaths / at_risk;
    }
    surv
}

/// `S(s-)` by direct counting.
pub fn km_left(obs: &[Obs], s: f64) -> f64 {
    let mut surv = 1.0;
    for u in event_times(obs) {
        if u >= s {
            break;
        }
        let at_risk = obs.iter().filter(|o| o.0 >= u).count() as f64;
        let deaths = obs.iter().filter(|o| o.0 == u && o.1).count() as f64;
        surv *= 1.0 - deaths / at_risk;
    }
    surv
}

/// A weight as a function of the pooled left-limit survival and the value of the
/// pooled survival at the modest-weight threshold.
#[derive(Clone, Copy, Debug)]
pub enum RefWeight {
    Fh(f64, f64),
    Modest(f64),
}

fn pow0(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        x.powf(e)
    }
}

impl RefWeight {
    pub fn eval(&self, obs: &[Obs], s: f64) -> f64 {
        let sl = km_left(obs, s);
        match *self {
            RefWeight::Fh(rho, gamma) => pow0(1.0 - sl, rho) * pow0(sl, gamma),
            RefWeight::Modest(s_star) => 1.0 / sl.max(km_left(obs, s_star)),
        }
    }
}

/// Per-subject contributions `c_{iℓ}` with `T_ℓ = n^{-1/2} Σ_i c_{iℓ}`, and the
/// covariance estimate, by explicit loops over distinct event times.
pub struct RefStatistics {
    pub n: usize,
    /// `contrib[i][ℓ]`.
    pub contrib: Vec<Vec<f64>>,
    pub t: Vec<f64>,
    pub sigma: DMatrix<f64>,
}

pub fn reference_statistics(obs: &[Obs], weights: &[RefWeight]) -> RefStatistics {
    let n = obs.len();
    let m = weights.len();
    let mut contrib = vec![vec![0.0; m]; n];
    let mut sigma = DMatrix::zeros(m, m);
    for u in event_times(obs) {
        let y = obs.iter().filter(|o| o.0 >= u).count() as f64;
        let y1 = obs.iter().filter(|o| o.0 >= u && o.2).count() as f64;
        let share = y1 / y;
        let q: Vec<f64> = weights.iter().map(|w| w.eval(obs, u)).collect();
        for (i, o) in obs.iter().enumerate() {
            if o.0 == u && o.1 {
                let z = if o.2 { 1.0 } else { 0.0 };
                for l in 0..m {
                    contrib[i][l] += q[l] * (share - z);
                }
                for a in 0..m {
                    for b in 0..m {
                        sigma[(a, b)] += q[a] * q[b] * share * (1.0 - share);
                    }
                }
            }
        }
    }
    sigma /= n as f64;
    let t = (0..m).map(|l| contrib.iter().map(|c| c[l]).sum::<f64>() / (n as f64).sqrt()).collect();
    RefStatistics { n, contrib, t, sigma }
}

impl RefStatistics {
    pub fn signed_t(&self, signs: &[f64]) -> Vec<f64> {
        let m = self.t.len();
        (0..m)
            .map(|l| self.contrib.iter().zip(signs).map(|(c, g)| g * c[l]).sum::<f64>() / (self.n as f64).sqrt())
            .collect()
    }
}

/// Pseudo-inverse through the singular value decomposition.
pub fn svd_pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.pseudo_inverse(1e-10 * smax.max(f64::MIN_POSITIVE)).unwrap()
}

/// Maximum admissible Wald form by enumerating all nonempty index subsets.
pub fn brute_force_mdir(t: &[f64], sigma: &DMatrix<f64>) -> f64 {
    let m = t.len();
    let mut best: f64 = 0.0;
    for mask in 1u32..(1 << m) {
        let idx: Vec<usize> = (0..m).filter(|j| mask >> j & 1 == 1).collect();
        let k = idx.len();
        let sub = DMatrix::from_fn(k, k, |a, b| sigma[(idx[a], idx[b])]);
        let tl = DVector::from_iterator(k, idx.iter().map(|&j| t[j]));
        let dir = svd_pinv(&sub) * &tl;
        let tol = 1e-9 * dir.amax();
        if dir.iter().all(|&v| v >= -tol) {
            best = best.max(tl.dot(&dir));
        }
    }
    best
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
