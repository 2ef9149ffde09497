use npsurv_core::sim::format_g6;
use npsurv_core::spline::{fit_grid, FitConfig, FittedGrid, SplineData, SplineDump, SplineScale};
use npsurv_core::survival::{read_ipd_file, Group};
use serde::Serialize;

use crate::args::{FitSplineArgs, GroupArg};
use crate::failure::{CmdResult, Failure};
use crate::io::write_json;

#[derive(Debug, Serialize)]
struct ModelDump {
    p: usize,
    scale: SplineScale,
    aic: Option<f64>,
    control: Option<SplineDump>,
    treatment: Option<SplineDump>,
}

pub fn run(args: FitSplineArgs) -> CmdResult {
    if args.grid.ps.is_empty() || args.grid.scales.is_empty() {
        return Err(Failure::usage("the spline grid is empty"));
    }
    let ipd = read_ipd_file(&args.ipd)?;
    let observations = |g: Group| -> Vec<(f64, bool)> {
        ipd.records.iter().filter(|r| r.group == g).map(|r| (r.time, r.event)).collect()
    };
    let cfg = FitConfig::default();
    let fit_group = |g: Group| -> Result<FittedGrid, Failure> {
        let data = SplineData::new(observations(g))?;
        Ok(fit_grid(&data, &args.grid.ps, &args.grid.scales, &cfg))
    };
    let control = matches!(args.group, GroupArg::Control | GroupArg::Both).then(|| fit_group(Group::Control)).transpose()?;
    let treatment =
        matches!(args.group, GroupArg::Treatment | GroupArg::Both).then(|| fit_group(Group::Treatment)).transpose()?;

    let mut dumps = Vec::new();
    for i in 0..args.grid.ps.len() * args.grid.scales.len() {
        let pick = |grid: &Option<FittedGrid>| grid.as_ref().map(|g| g[i].model.as_ref().ok().map(SplineDump::from));
        let (c, t) = (pick(&control), pick(&treatment));
        let aic = match (&c, &t) {
            (Some(None), _) | (_, Some(None)) => None,
            _ => Some(c.iter().chain(&t).flatten().map(|d| d.aic).sum()),
        };
        dumps.push(ModelDump {
            p: args.grid.ps[i / args.grid.scales.len()],
            scale: args.grid.scales[i % args.grid.scales.len()],
            aic,
            control: c.flatten(),
            treatment: t.flatten(),
        });
    }

    let header: Vec<&str> = args.grid.scales.iter().map(|s| s.name()).collect();
    println!("p\t{}", header.join("\t"));
    for row in dumps.chunks(args.grid.scales.len()) {
        let cells: Vec<String> = row.iter().map(|d| d.aic.map(format_g6).unwrap_or_else(|| "NA".into())).collect();
        println!("{}\t{}", row[0].p, cells.join("\t"));
    }
    if let Some(path) = &args.dump {
        write_json(&dumps, Some(path))?;
    }
    Ok(())
}
