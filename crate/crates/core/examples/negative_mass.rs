//! How much of `v` is sold back as the transaction cost `θ` rises, for a few
//! numbers of agents.

use impact_game::finite::{self, KernelMatrices};
use impact_game::model::GameParams;
use impact_game::threshold;

fn main() -> impact_game::Result<()> {
    let thetas: Vec<f64> = (0..=12).map(|k| k as f64 * 0.1).collect();
    print!("{:>6}", "theta");
    for n in [1, 2, 3, 5] {
        print!(" {:>10}", format!("n={n}"));
    }
    println!();
    for theta in thetas {
        print!("{theta:>6.2}");
        for n in [1, 2, 3, 5] {
            let params = GameParams::standard(n, 100, 0.0, theta, 1.0, 1.0)?;
            let v = finite::compute_v(&KernelMatrices::build(&params), n)?.value;
            let report = threshold::oscillation_report(v.as_slice())?;
            print!(" {:>10.6}", report.negative_mass);
        }
        println!();
    }
    Ok(())
}
