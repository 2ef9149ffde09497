use npsurv_core::cond_power::calibrate_theta;
use npsurv_core::design::DesignConfig;
use npsurv_core::logrank::WeightSpec;
use npsurv_core::scenario::ScenarioConfig;
use npsurv_core::sim::format_g6;

use crate::args::CalibrateArgs;
use crate::failure::CmdResult;
use crate::io::read_json;

pub fn run(args: CalibrateArgs) -> CmdResult {
    let mut scenario: ScenarioConfig = read_json(&args.scenario)?;
    let design = read_json::<DesignConfig>(&args.design)?.build()?;
    scenario.theta = None;
    scenario.theta_multiple = None;
    let base = scenario.resolve(None)?;
    base.validate()?;
    let weight = args.weight.unwrap_or(WeightSpec::fh(base.rho_star, base.gamma_star));
    let theta0 = calibrate_theta(&base, &design, &weight, args.target, args.variance_form.into())?;
    println!("theta0={}", format_g6(theta0));
    Ok(())
}
