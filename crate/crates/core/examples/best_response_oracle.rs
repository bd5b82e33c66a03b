//! Checks the fixed-point property of an equilibrium: each agent's best
//! response to the others reproduces its own schedule, and a deviation costs
//! exactly the optimality gap.

use impact_game::finite::{self, KernelMatrices, Strategy};
use impact_game::model::GameParams;
use nalgebra::DVector;

fn main() -> impact_game::Result<()> {
    let params = GameParams::standard(2, 25, 1.0, 0.05, 2.0, 0.7)?.with_s0(10.0)?;
    let eq = finite::nash_equilibrium(&params, &[1.0, 0.3])?;
    let mats = KernelMatrices::build(&params);

    for i in 0..2 {
        let others = vec![eq.strategies[1 - i].clone()];
        let br = finite::best_response(&others, eq.strategies[i].inventory, &params)?;
        let diff = (&br.trades - &eq.strategies[i].trades).amax();
        println!("agent {}: |best response - equilibrium| = {diff:e}", i + 1);
    }

    let star = &eq.strategies[0];
    let others = vec![eq.strategies[1].clone()];
    let m = star.len();
    for size in [0.01, 0.1, 0.5] {
        let bump = DVector::from_fn(m, |k, _| {
            if k == 0 {
                size
            } else if k == m - 1 {
                -size
            } else {
                0.0
            }
        });
        let candidate = Strategy::new(&star.trades + bump, star.inventory)?;
        let increase = mats.mv_cost(params.s0(), &candidate, &others)? - mats.mv_cost(params.s0(), star, &others)?;
        let gap = finite::optimality_gap(&candidate, star, eq.multipliers[0], &mats)?;
        println!("shift {size:>4}: cost increase {increase:.10e}, gap {gap:.10e}");
    }
    Ok(())
}
