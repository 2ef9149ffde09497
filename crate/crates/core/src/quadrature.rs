//! Globally adaptive composite Gauss-Legendre quadrature.
//!
//! Every interval is integrated with the 15-point rule; its error is estimated by
//! comparing against the sum over its two halves. The interval with the largest
//! normalized error is bisected until the summed error estimate meets the tolerance.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const POINTS: usize = 15;
const MAX_INTERVALS: usize = 5000;

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-12, rel: 1e-8 }
    }
}

/// Nodes and weights of the 15-point Gauss-Legendre rule on `[-1, 1]`.
fn gauss_legendre() -> &'static ([f64; POINTS], [f64; POINTS]) {
    static RULE: OnceLock<([f64; POINTS], [f64; POINTS])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = POINTS;
        let mut nodes = [0.0; POINTS];
        let mut weights = [0.0; POINTS];
        for i in 0..n {
            // Chebyshev-like initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn rule<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> [f64; N] {
    let (nodes, weights) = gauss_legendre();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = [0.0; N];
    for (x, w) in nodes.iter().zip(weights) {
        let v = f(mid + half * x);
        for k in 0..N {
            acc[k] += w * v[k];
        }
    }
    for v in acc.iter_mut() {
        *v *= half;
    }
    acc
}

struct Segment<const N: usize> {
    a: f64,
    b: f64,
    left: [f64; N],
    right: [f64; N],
    err: [f64; N],
}

impl<const N: usize> Segment<N> {
    fn new<F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64, whole: [f64; N]) -> Self {
        let m = 0.5 * (a + b);
        let left = rule(f, a, m);
        let right = rule(f, m, b);
        let mut err = [0.0; N];
        for k in 0..N {
            err[k] = (whole[k] - left[k] - right[k]).abs();
        }
        // Intervals that can no longer be split contribute no further refinement.
        if !(m > a && m < b) {
            err = [0.0; N];
        }
        Self { a, b, left, right, err }
    }
}

/// Integrate a vector-valued function over `[a, b]`, forcing interval boundaries at
/// `breakpoints` (points outside the open interval are ignored).
pub fn integrate_vec<const N: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<[f64; N]>
where
    F: FnMut(f64) -> [f64; N],
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidInput(format!("integration limits must be finite: [{a}, {b}]")));
    }
    if b <= a {
        return Ok([0.0; N]);
    }
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);

    let mut segments: Vec<Segment<N>> = edges
        .windows(2)
        .map(|w| {
            let whole = rule(&mut f, w[0], w[1]);
            Segment::new(&mut f, w[0], w[1], whole)
        })
        .collect();

    loop {
        let mut total = [0.0; N];
        let mut err = [0.0; N];
        for s in &segments {
            for k in 0..N {
                total[k] += s.left[k] + s.right[k];
                err[k] += s.err[k];
            }
        }
        if total.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadrature { a, b, error: f64::NAN });
        }
        let limits: Vec<f64> = (0..N).map(|k| tol.abs.max(tol.rel * total[k].abs())).collect();
        if (0..N).all(|k| err[k] <= limits[k]) {
            return Ok(total);
        }
        if segments.len() >= MAX_INTERVALS {
            let worst = (0..N).map(|k| err[k]).fold(0.0, f64::max);
            return Err(Error::Quadrature { a, b, error: worst });
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let score = (0..N).map(|k| s.err[k] / limits[k]).fold(0.0, f64::max);
                (i, score)
            })
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let seg = segments.swap_remove(idx);
        let m = 0.5 * (seg.a + seg.b);
        segments.push(Segment::new(&mut f, seg.a, m, seg.left));
        segments.push(Segment::new(&mut f, m, seg.b, seg.right));
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    integrate_vec(|x| [f(x)], a, b, breakpoints, tol).map(|v| v[0])
}

/// Plain 15-point Gauss-Legendre on a single interval, no adaptivity.
pub fn gauss_legendre_15<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    rule(&mut |x| [f(x)], a, b)[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        // Exact up to degree 29.
        let v = gauss_legendre_15(|x| x.powi(28) + 3.0 * x.powi(5), -1.0, 1.0);
        assert!((v - 2.0 / 29.0).abs() < 1e-15);
        let (_, w) = gauss_legendre();
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_kinks_and_singularities() {
        let tol = Tolerance::new(1e-12, 1e-10);
        let v = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[], tol).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-10);
        let w = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, &[], tol).unwrap();
        assert!((w - 2.0).abs() < 1e-8);
        let e = integrate(|x: f64| (-x).exp(), 0.0, 50.0, &[1.0, 10.0], tol).unwrap();
        assert!((e - (1.0 - (-50.0f64).exp())).abs() < 1e-11);
    }

    #[test]
    fn vector_components_converge_independently() {
        let tol = Tolerance::new(1e-14, 1e-10);
        let v = integrate_vec(|x: f64| [x.sin(), 1e6 * x * x], 0.0, std::f64::consts::PI, &[], tol)
            .unwrap();
        assert!((v[0] - 2.0).abs() < 1e-10);
        assert!((v[1] - 1e6 * std::f64::consts::PI.powi(3) / 3.0).abs() < 1e-3);
    }
}
