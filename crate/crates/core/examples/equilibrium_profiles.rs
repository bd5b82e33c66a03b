//! Equilibrium trading schedules of a small finite-horizon game, printed as
//! a table of `t, v, w` and each agent's trades.

use impact_game::finite;
use impact_game::model::GameParams;

fn main() -> impact_game::Result<()> {
    let params = GameParams::standard(3, 12, 0.5, 0.1, 1.0, 1.0)?;
    let inventories = [1.0, 0.5, -0.25];
    let eq = finite::nash_equilibrium(&params, &inventories)?;

    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}", "t", "v", "w", "xi_1", "xi_2", "xi_3");
    for (k, t) in params.grid().times().iter().enumerate() {
        print!("{t:>6.3} {:>10.6} {:>10.6}", eq.v[k], eq.w[k]);
        for s in &eq.strategies {
            print!(" {:>10.6}", s.trades[k]);
        }
        println!();
    }
    println!();
    for (i, (cost, alpha)) in eq.mv_costs.iter().zip(&eq.multipliers).enumerate() {
        println!("agent {}: mean-variance cost {cost:.6}, multiplier {alpha:.6}", i + 1);
    }
    println!("first-order residual {:e}", eq.foc_residual);
    Ok(())
}
