//! Derivative-free minimization and scalar root bracketing.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    /// Stop when `max f - min f` over the simplex falls below this.
    pub f_tol: f64,
    pub max_iter: usize,
    /// Initial simplex edge along each coordinate.
    pub step: f64,
    /// Additional re-started simplex searches from the incumbent.
    pub restarts: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { f_tol: 1e-8, max_iter: 2000, step: 0.1, restarts: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` with the Nelder-Mead simplex method. Non-finite values are treated as
/// `+∞`, which lets the objective encode infeasible regions.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], cfg: &NelderMeadConfig) -> Minimum {
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best = simplex_search(&mut eval, x0, cfg);
    let mut total = best.iterations;
    for _ in 0..cfg.restarts {
        if !best.f.is_finite() {
            break;
        }
        let next = simplex_search(&mut eval, &best.x.clone(), cfg);
        total += next.iterations;
        let improved = next.f < best.f - cfg.f_tol;
        if next.f < best.f {
            best = next;
        }
        if !improved {
            break;
        }
    }
    best.iterations = total;
    best
}

fn simplex_search<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], cfg: &NelderMeadConfig) -> Minimum {
    let d = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    pts.push(x0.to_vec());
    for j in 0..d {
        let mut p = x0.to_vec();
        p[j] += if p[j] != 0.0 { cfg.step * p[j].abs().max(1.0) } else { cfg.step };
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut iterations = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; d];
    let mut trial = vec![0.0; d];
    let mut trial2 = vec![0.0; d];
    while iterations < cfg.max_iter {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = vals[d] - vals[0];
        if vals[0].is_finite() && spread.is_finite() && spread < cfg.f_tol {
            converged = true;
            break;
        }
        iterations += 1;
        centroid.iter_mut().for_each(|c| *c = 0.0);
        for p in &pts[..d] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / d as f64;
            }
        }
        let worst = pts[d].clone();
        let along = |coef: f64, out: &mut Vec<f64>| {
            for j in 0..d {
                out[j] = centroid[j] + coef * (worst[j] - centroid[j]);
            }
        };
        along(-1.0, &mut trial);
        let fr = f(&trial);
        if fr < vals[0] {
            along(-2.0, &mut trial2);
            let fe = f(&trial2);
            if fe < fr {
                pts[d].clone_from(&trial2);
                vals[d] = fe;
            } else {
                pts[d].clone_from(&trial);
                vals[d] = fr;
            }
            continue;
        }
        if fr < vals[d - 1] {
            pts[d].clone_from(&trial);
            vals[d] = fr;
            continue;
        }
        let (coef, reference) = if fr < vals[d] { (-0.5, fr) } else { (0.5, vals[d]) };
        along(coef, &mut trial2);
        let fc = f(&trial2);
        if fc < reference || (fc == reference && fc.is_finite()) {
            pts[d].clone_from(&trial2);
            vals[d] = fc;
            continue;
        }
        let anchor = pts[0].clone();
        for i in 1..=d {
            for j in 0..d {
                pts[i][j] = anchor[j] + 0.5 * (pts[i][j] - anchor[j]);
            }
            vals[i] = f(&pts[i]);
        }
    }
    let (k, _) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty simplex");
    Minimum { x: pts[k].clone(), f: vals[k], iterations, converged }
}

/// Root of a continuous function on `[lo, hi]` by bisection. The endpoint values must
/// have opposite signs (or one of them be zero).
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.signum() != fhi.signum()) || flo.is_nan() || fhi.is_nan() {
        return Err(Error::Bracketing(format!("no sign change on [{lo}, {hi}]: f = ({flo}, {fhi})")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= x_tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
