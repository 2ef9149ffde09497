//! Knot-free parametric survival models `g(S(t)) = a + b ln t` written out per link,
//! with maximum likelihood by nested golden-section search.

use npsurv_core::spline::SplineScale;

fn ln_phi_upper(eta: f64) -> f64 {
    // ln Φ(-η)
    (0.5 * libm::erfc(eta / std::f64::consts::SQRT_2)).ln()
}

/// Log-likelihood of the two-parameter model `g(S(t)) = a + b ln t`, written out per scale.
pub fn loglik_p0(scale: SplineScale, a: f64, b: f64, obs: &[(f64, bool)]) -> f64 {
    if b <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut ll = 0.0;
    for &(t, event) in obs {
        if t <= 0.0 {
            continue;
        }
        let eta = a + b * t.ln();
        let (ln_f_core, ln_s) = match scale {
            SplineScale::Hazard => (eta - eta.exp(), -eta.exp()),
            SplineScale::Odds => {
                let l = (1.0 + eta.exp()).ln();
                (eta - 2.0 * l, -l)
            }
            SplineScale::Normal => (-0.5 * eta * eta - 0.5 * (2.0 * std::f64::consts::PI).ln(), ln_phi_upper(eta)),
        };
        ll += if event { ln_f_core + b.ln() - t.ln() } else { ln_s };
    }
    ll
}

pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-9 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Maximum-likelihood `(a, b)` by nested golden-section searches.
pub fn reference_mle(scale: SplineScale, obs: &[(f64, bool)]) -> (f64, f64, f64) {
    let inner = |b: f64| golden_max(|a| loglik_p0(scale, a, b, obs), -30.0, 30.0);
    let b = golden_max(|b| loglik_p0(scale, inner(b), b, obs), 0.05, 10.0);
    let a = inner(b);
    (a, b, loglik_p0(scale, a, b, obs))
}

/// `S(t)` of the two-parameter model.
pub fn reference_survival(scale: SplineScale, a: f64, b: f64, t: f64) -> f64 {
    let eta = a + b * t.ln();
    match scale {
        SplineScale::Hazard => (-eta.exp()).exp(),
        SplineScale::Odds => 1.0 / (1.0 + eta.exp()),
        SplineScale::Normal => 0.5 * libm::erfc(eta / std::f64::consts::SQRT_2),
    }
}
