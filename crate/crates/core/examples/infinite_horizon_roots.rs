//! Decay rates of the infinite-horizon equilibrium: `α` for `v` and `β` for
//! `w`, as functions of risk aversion, and the resulting strategies.

use impact_game::infinite::{self, InfiniteParams, DEFAULT_ROOT_TOL, DEFAULT_TAIL_BOUND};

fn main() -> impact_game::Result<()> {
    println!("{:>6} {:>12} {:>12} {:>12}", "gamma", "alpha(n=1)", "alpha(n=3)", "beta");
    for gamma in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let one = InfiniteParams::new(1, 1.0, gamma, 1.0)?;
        let three = InfiniteParams::new(3, 1.0, gamma, 1.0)?;
        let a1 = infinite::solve_alpha(&one, DEFAULT_ROOT_TOL)?.value;
        let a3 = infinite::solve_alpha(&three, DEFAULT_ROOT_TOL)?.value;
        let b = infinite::solve_beta(three.critical_theta(), &three, DEFAULT_ROOT_TOL)?.value;
        println!("{gamma:>6} {a1:>12.8} {a3:>12.8} {b:>12.8}");
    }

    let params = InfiniteParams::new(3, 1.0, 1.0, 1.0)?;
    let eq = infinite::infinite_nash(&params, params.critical_theta(), &[1.0, 0.5, 0.0], DEFAULT_TAIL_BOUND)?;
    println!("\ntruncated after {} trades, tail bounds {:?}", eq.len(), eq.tail_bounds);
    for k in 0..6 {
        let row: Vec<String> = eq.strategies.iter().map(|s| format!("{:>10.6}", s[k])).collect();
        println!("k={k} {}", row.join(" "));
    }

    let check = infinite::verify_v_identity(&params, eq.alpha.value, DEFAULT_TAIL_BOUND)?;
    println!("v identity: max deviation {:e} over {} rows", check.max_deviation, check.rows_checked);
    Ok(())
}
