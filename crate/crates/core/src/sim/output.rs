use std::io::Write;

use super::study::StudyResult;
use crate::error::Result;
use crate::logrank::WeightSpec;
use crate::spline::SplineScale;

/// Six significant digits, `%g` style: fixed notation for exponents in `[-5, 6)`,
/// scientific otherwise, trailing zeros removed.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn scenario_prefix(label: &str, rho: f64, gamma: f64, multiple: f64) -> String {
    format!("{label},{},{},{}", format_g6(rho), format_g6(gamma), format_g6(multiple))
}

pub fn write_results_csv<W: Write>(study: &StudyResult, mut out: W) -> Result<()> {
    writeln!(
        out,
        "scenario,rho_star,gamma_star,theta_multiple,procedure,n_per_group,replicates,power,early_rejection_rate,mc_halfwidth"
    )?;
    for cell in &study.cells {
        let prefix = scenario_prefix(&cell.label, cell.scenario.rho_star, cell.scenario.gamma_star, cell.theta_multiple);
        for s in &cell.summaries {
            writeln!(
                out,
                "{prefix},{},{},{},{},{},{}",
                s.procedure,
                cell.scenario.n_per_group,
                s.replicates,
                format_g6(s.power),
                format_g6(s.early_rejection_rate),
                format_g6(s.mc_halfwidth)
            )?;
        }
    }
    Ok(())
}

fn weight_columns(w: &WeightSpec) -> (String, String) {
    match *w {
        WeightSpec::FlemingHarrington { rho, gamma } => (format_g6(rho), format_g6(gamma)),
        WeightSpec::Modest { .. } => (w.to_string(), String::new()),
    }
}

/// Relative selection frequencies of second-stage weights among continued trials.
pub fn write_selection_csv<W: Write>(study: &StudyResult, mut out: W) -> Result<()> {
    writeln!(
        out,
        "scenario,rho_star,gamma_star,theta_multiple,procedure,candidate_rho,candidate_gamma,frequency"
    )?;
    for cell in &study.cells {
        let prefix = scenario_prefix(&cell.label, cell.scenario.rho_star, cell.scenario.gamma_star, cell.theta_multiple);
        for s in cell.summaries.iter().filter(|s| !s.selection.is_empty()) {
            for (w, count) in &s.selection {
                let freq = if s.continued > 0 { *count as f64 / s.continued as f64 } else { 0.0 };
                let (r, g) = weight_columns(w);
                writeln!(out, "{prefix},{},{r},{g},{}", s.procedure, format_g6(freq))?;
            }
        }
    }
    Ok(())
}

/// Relative frequencies of the AIC-selected spline model among continued trials, one
/// row per number of internal knots and one column per scale.
pub fn write_spline_csv<W: Write>(study: &StudyResult, mut out: W) -> Result<()> {
    writeln!(out, "scenario,rho_star,gamma_star,theta_multiple,procedure,p,hazard,odds,normal")?;
    for cell in &study.cells {
        let prefix = scenario_prefix(&cell.label, cell.scenario.rho_star, cell.scenario.gamma_star, cell.theta_multiple);
        for s in cell.summaries.iter().filter(|s| !s.selection.is_empty()) {
            let total: usize = s.spline_choice.values().sum();
            let mut ps: Vec<usize> = s.spline_choice.keys().map(|k| k.0).collect();
            ps.extend([0, 1, 2]);
            ps.sort_unstable();
            ps.dedup();
            for p in ps {
                let freq = |scale: SplineScale| {
                    let c = s.spline_choice.get(&(p, scale)).copied().unwrap_or(0);
                    format_g6(if total > 0 { c as f64 / total as f64 } else { 0.0 })
                };
                writeln!(
                    out,
                    "{prefix},{},{p},{},{},{}",
                    s.procedure,
                    freq(SplineScale::Hazard),
                    freq(SplineScale::Odds),
                    freq(SplineScale::Normal)
                )?;
            }
        }
    }
    Ok(())
}
