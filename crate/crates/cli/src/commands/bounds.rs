use npsurv_core::design::{bounds, BoundShape, Combination};

use crate::args::{BoundType, BoundsArgs};
use crate::failure::{CmdResult, Failure};

pub fn run(args: BoundsArgs) -> CmdResult {
    if !(args.alpha > 0.0 && args.alpha < 0.5) {
        return Err(Failure::usage(format!("alpha must lie in (0, 0.5), got {}", args.alpha)));
    }
    if args.weights.len() != 2 {
        return Err(Failure::usage(format!("--weights takes two values, got {}", args.weights.len())));
    }
    let combination = Combination::InverseNormal { w1: args.weights[0], w2: args.weights[1] };
    combination.validate()?;
    let shape = match args.shape {
        BoundType::Obf => BoundShape::OBrienFleming,
        BoundType::Pocock => BoundShape::Pocock,
    };
    let (alpha1, c) = bounds(shape, args.alpha, combination)?;
    println!("alpha1={alpha1:.6} c={c:.6}");
    Ok(())
}
