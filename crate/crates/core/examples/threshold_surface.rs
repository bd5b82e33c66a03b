//! Critical transaction costs over a grid of agent counts and risk aversions,
//! computed in parallel.

use impact_game::model::{DecayKernel, VarianceFunction};
use impact_game::threshold::{self, Which};

fn main() -> impact_game::Result<()> {
    let kernel = DecayKernel::exponential(1.0)?;
    let variance = VarianceFunction::bachelier(1.0)?;
    let points = threshold::grid(&[2, 3, 4, 5], &[200], &[0.0, 1.0, 5.0]);

    for which in [Which::V, Which::W] {
        println!("theta_{which}");
        for row in threshold::sweep(&points, which, kernel, &variance, 1e-4) {
            let r = row.result?;
            println!(
                "  n={} gamma={:<4} theta*={:.5} converged={} monotone={}",
                r.n, r.gamma, r.theta_star, r.converged, r.monotone
            );
        }
    }
    Ok(())
}
