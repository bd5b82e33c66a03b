//! Simulates the unaffected price as a Brownian motion, prices each agent's
//! equilibrium trades, and compares the sample mean, variance and CARA
//! utility of the costs with their exact values.

use impact_game::finite;
use impact_game::model::GameParams;
use impact_game::simulation;

fn main() -> impact_game::Result<()> {
    let params = GameParams::standard(2, 10, 0.5, 0.05, 1.0, 1.0)?.with_s0(1.0)?;
    let eq = finite::nash_equilibrium(&params, &[1.0, -0.4])?;
    let report = simulation::validate(&params, &eq.strategies, 200_000, 42)?;

    for (i, a) in report.moments.agents.iter().enumerate() {
        println!(
            "agent {}: mean {:.6} vs {:.6} (z {:+.2}), variance {:.6} vs {:.6} (z {:+.2})",
            i + 1,
            a.mean.estimate,
            a.mean.target,
            a.mean.z,
            a.variance.estimate,
            a.variance.target,
            a.variance.z
        );
    }
    if let Some(cara) = &report.cara {
        for (i, a) in cara.agents.iter().enumerate() {
            println!(
                "agent {}: log E[exp(gamma C)] {:.6} vs {:.6} (z {:+.2})",
                i + 1,
                a.log_mean_exp,
                a.log_target,
                a.z
            );
        }
    }
    Ok(())
}
