use npsurv_core::design::{
    bounds, obf_bounds, pocock_bounds, BoundShape, Combination, DesignConfig, StageDecision, TwoStageDesign,
};
use npsurv_core::normal;
use proptest::prelude::*;

const W: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn equal() -> Combination {
    Combination::InverseNormal { w1: W, w2: W }
}

#[test]
fn obrien_fleming_bounds_at_one_sided_2_5_percent() {
    let (a1, c) = obf_bounds(0.025, W, W).unwrap();
    assert!((a1 - 0.002583).abs() < 1e-6, "{a1}");
    assert!((c - 0.023996).abs() < 1e-6, "{c}");
}

#[test]
fn bounds_match_bivariate_normal_tail() {
    for alpha in [0.01, 0.025, 0.05] {
        for (w1, w2) in [(W, W), (0.6, 0.8), (0.8, 0.6)] {
            let (a1, c) = obf_bounds(alpha, w1, w2).unwrap();
            let b = normal::quantile(1.0 - c);
            // Corr(Z₁, w₁Z₁ + w₂Z₂) = w₁.
            let level = 1.0 - normal::bivariate_cdf(b / w1, b, w1);
            assert!((level - alpha).abs() < 1e-9, "obf {alpha} ({w1},{w2}): {level}");
            assert!((normal::quantile(1.0 - a1) - b / w1).abs() < 1e-8);

            let (p1, pc) = pocock_bounds(alpha, w1, w2).unwrap();
            assert!((p1 - pc).abs() < 1e-15);
            let b = normal::quantile(1.0 - pc);
            let level = 1.0 - normal::bivariate_cdf(b, b, w1);
            assert!((level - alpha).abs() < 1e-9, "pocock {alpha} ({w1},{w2}): {level}");
        }
    }
}

#[test]
fn level_equation_for_derived_bounds() {
    for alpha in [0.01, 0.025, 0.05] {
        for shape in [BoundShape::OBrienFleming, BoundShape::Pocock] {
            let (a1, c) = bounds(shape, alpha, equal()).unwrap();
            let d = TwoStageDesign::new(alpha, 1.0, a1, c, equal(), 1.0, 2.0).unwrap();
            let level = d.level_check().unwrap();
            assert!((level - alpha).abs() < 1e-6, "{shape:?} {alpha}: {level}");
        }
    }
}

#[test]
fn fisher_product_level_closed_form() {
    // α₁ + c ln(α₀ / α₁) when c ≤ α₁.
    let (a1, a0, c) = (0.0102, 0.5, 0.0038);
    let d = TwoStageDesign::new(0.025, a0, a1, c, Combination::FisherProduct, 1.0, 2.0).unwrap();
    let closed = a1 + c * (a0 / a1).ln();
    assert!((d.level_check().unwrap() - closed).abs() < 1e-10);
    assert!((closed - 0.025).abs() < 1e-4);

    // c > α₁: the conditional error is 1 on (α₁, c].
    let d = TwoStageDesign::new(0.05, 1.0, 0.01, 0.02, Combination::FisherProduct, 1.0, 2.0).unwrap();
    let closed = 0.01 + (0.02 - 0.01) + 0.02 * (1.0f64 / 0.02).ln();
    assert!((d.level_check().unwrap() - closed).abs() < 1e-10);
}

/// `sup{u : C(p₁, u) ≤ c}` by bisection on the combination function.
fn conditional_error_by_bisection(comb: Combination, p1: f64, c: f64) -> f64 {
    if comb.combine(p1, 1.0) <= c {
        return 1.0;
    }
    if comb.combine(p1, 1e-300) > c {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if comb.combine(p1, mid) <= c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[test]
fn conditional_error_closed_form_matches_bisection() {
    let designs = [
        (equal(), 0.023996),
        (Combination::InverseNormal { w1: 0.6, w2: 0.8 }, 0.02),
        (Combination::FisherProduct, 0.0038),
    ];
    for (comb, c) in designs {
        for k in 1..200 {
            let p1 = 0.003 + k as f64 * 0.0049;
            let closed = comb.conditional_error(p1, c);
            let bis = conditional_error_by_bisection(comb, p1, c);
            assert!((closed - bis).abs() < 1e-10, "{comb:?} p1 {p1}: {closed} vs {bis}");
        }
    }
}

#[test]
fn combination_table_values() {
    assert!((equal().combine(0.05, 0.05) - 0.010004626858059014).abs() < 1e-13);
    assert!((equal().combine(0.5, 0.5) - 0.5).abs() < 1e-15);
    assert!((Combination::FisherProduct.combine(0.1, 0.2) - 0.02).abs() < 1e-16);
}

#[test]
fn stage_decisions() {
    let d = TwoStageDesign::obf(0.025, equal(), 1.0, 2.0).unwrap();
    assert_eq!(d.decide(0.001, None), StageDecision::RejectAtInterim);
    assert_eq!(d.decide(0.9, None), StageDecision::Continue);
    assert_eq!(d.decide(0.05, Some(0.001)), StageDecision::RejectAtFinal);
    assert_eq!(d.decide(0.05, Some(0.5)), StageDecision::AcceptAtFinal);
    let f = TwoStageDesign::new(0.025, 0.5, 0.0102, 0.0038, Combination::FisherProduct, 1.0, 2.0).unwrap();
    assert_eq!(f.decide(0.6, None), StageDecision::FutilityStop);
    assert!(f.conditional_error(0.6).is_err());
    assert!(d.conditional_error(0.001).is_err());
}

#[test]
fn invalid_designs_are_rejected() {
    assert!(TwoStageDesign::obf(0.025, Combination::InverseNormal { w1: 0.5, w2: 0.5 }, 1.0, 2.0).is_err());
    assert!(TwoStageDesign::new(0.025, 1.0, 0.03, 0.02, equal(), 1.0, 2.0).is_err());
    assert!(TwoStageDesign::new(0.025, 1.0, 0.0025, 0.024, equal(), 2.0, 1.0).is_err());
}

#[test]
fn design_file_round_trip() {
    let text = r#"{"alpha":0.025,"combination":{"type":"inverse_normal","w1":0.7071067811865476,"w2":0.7071067811865476},
                  "bounds":{"type":"obf"},"t1":5,"t2":8}"#;
    let cfg: DesignConfig = serde_json::from_str(text).unwrap();
    let d = cfg.build().unwrap();
    let back: DesignConfig = serde_json::from_str(&serde_json::to_string(&DesignConfig::from(&d)).unwrap()).unwrap();
    assert_eq!(back.build().unwrap(), d);
    assert!(serde_json::from_str::<DesignConfig>(&text.replace("\"t1\"", "\"extra\":1,\"t1\"")).is_err());
}

proptest! {
    #[test]
    fn combine_is_monotone(p1 in 1e-6f64..1.0, p2 in 1e-6f64..1.0, dp in 1e-6f64..0.5) {
        for comb in [equal(), Combination::FisherProduct, Combination::InverseNormal { w1: 0.3, w2: (1.0f64 - 0.09).sqrt() }] {
            prop_assert!(comb.combine((p1 + dp).min(1.0), p2) >= comb.combine(p1, p2) - 1e-15);
            prop_assert!(comb.combine(p1, (p2 + dp).min(1.0)) >= comb.combine(p1, p2) - 1e-15);
        }
    }

    #[test]
    fn conditional_error_decreases_in_p1(p1 in 0.003f64..0.99, dp in 1e-4f64..0.5) {
        for comb in [equal(), Combination::FisherProduct] {
            prop_assert!(comb.conditional_error((p1 + dp).min(1.0), 0.02) <= comb.conditional_error(p1, 0.02) + 1e-15);
        }
    }

    #[test]
    fn final_rejection_iff_combined_below_c(p1 in 0.003f64..0.999, p2 in 1e-8f64..1.0) {
        let d = TwoStageDesign::obf(0.025, equal(), 1.0, 2.0).unwrap();
        let rejected = d.decide(p1, Some(p2)) == StageDecision::RejectAtFinal;
        prop_assert_eq!(rejected, d.combine(p1, p2) <= d.c);
        // Equivalently, p2 at or below the conditional error.
        let ce = d.conditional_error(p1).unwrap();
        if (p2 - ce).abs() > 1e-9 {
            prop_assert_eq!(rejected, p2 < ce);
        }
    }
}
