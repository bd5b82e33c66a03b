//! Without risk aversion and at `θ = 1/4` under exponential decay, `w` has a
//! closed form: equal interior trades and a larger final block. Compares it
//! with the linear solve.

use impact_game::finite::{self, KernelMatrices};
use impact_game::model::GameParams;

fn main() -> impact_game::Result<()> {
    let rho = 1.5;
    for intervals in [1, 4, 10, 100] {
        let params = GameParams::standard(2, intervals, 0.0, 0.25, rho, 1.0)?;
        let solved = finite::compute_w(&KernelMatrices::build(&params))?.value;
        let closed = finite::w_closed_form(intervals, rho)?;
        println!(
            "N = {intervals:>3}: w_0 = {:.10}, w_N = {:.10}, max deviation {:e}",
            closed[0],
            closed[intervals],
            (&solved - &closed).amax()
        );
    }
    Ok(())
}
